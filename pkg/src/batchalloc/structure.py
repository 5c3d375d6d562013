"""Group structure of an optimal regularized stage solution.

At an optimum of a matching-type stage program, the supported edges split
the touched vertices into groups.  Group 0 holds the offline vertices that
were filled up together with their online neighbours; every other group is a
connected component of the remaining support, and all offline vertices of a
group share one value c = w_j (1 - f_k(load_j)).  Online vertices never
have edges into groups of strictly larger value, and online vertices outside
group 0 are fully allocated.

Both the b-matching rounding and the certificates are built on this.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EPS_SUP = 1e-7
EPS_SAT = 1e-6
MERGE_REL = 1e-6


class DecompositionError(RuntimeError):
    pass


@dataclass
class Decomposition:
    k: int
    online_group: np.ndarray
    offline_group: np.ndarray
    c: np.ndarray
    offline_value: np.ndarray
    tol: float
    violations: list = field(default_factory=list)

    @property
    def L(self) -> int:
        return int(self.c.size) - 1

    def U(self, l: int) -> np.ndarray:
        return np.flatnonzero(self.online_group == l)

    def V(self, l: int) -> np.ndarray:
        return np.flatnonzero(self.offline_group == l)

    @property
    def ok(self) -> bool:
        return not self.violations

    def raise_on_violation(self):
        if self.violations:
            raise DecompositionError("; ".join(self.violations[:5]))
        return self


def _components(n_nodes, a, b):
    parent = np.arange(n_nodes)

    def find(p):
        root = p
        while parent[root] != root:
            root = parent[root]
        while parent[p] != root:
            parent[p], p = root, parent[p]
        return root

    for p, q in zip(a, b):
        rp, rq = find(p), find(q)
        if rp != rq:
            parent[max(rp, rq)] = min(rp, rq)
    return np.array([find(p) for p in range(n_nodes)], dtype=int)


def decompose(sched, k, us, js, x, nu, w, B, y, tol=None, gap=0.0) -> Decomposition:
    """Decompose a stage solution of the vertex-weighted (b-)matching program.

    ``us, js`` list the stage edges (online index in the batch, offline
    index); ``y`` is the capacity already used before the stage and ``B``
    the capacities, so loads are (y + sum x) / B.
    """
    w = np.asarray(w, dtype=float)
    B = np.asarray(B, dtype=float)
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    nv = w.size
    if tol is None:
        tol = 10.0 * gap + 1e-6
    scale = max(1.0, float(w.max(initial=0.0)))
    s = np.bincount(js, weights=x, minlength=nv)
    load = np.clip((y + s) / B, 0.0, 1.0)
    cj = w * (1.0 - sched.f(k, load))
    supp = x > EPS_SUP
    # a vertex whose marginal value is indistinguishable from 0 counts as saturated;
    # near saturation c_j ~ sqrt(w_j * gap) since the gap is quadratic in the
    # remaining room (f' <= 1), so the linear tolerance alone is too tight
    sat = (load >= 1.0 - EPS_SAT) | (cj <= np.maximum(tol * scale, 2.0 * np.sqrt(w * max(gap, 0.0))))
    rows = np.bincount(us, weights=x, minlength=nu)

    online_group = -np.ones(nu, dtype=int)
    offline_group = -np.ones(nv, dtype=int)
    offline_group[sat] = 0
    touched_online = np.zeros(nu, dtype=bool)
    touched_online[us[supp]] = True
    to_sat = np.zeros(nu, dtype=bool)
    to_sat[us[supp & sat[js]]] = True
    online_group[to_sat | ~touched_online] = 0

    # components of the remaining support; nodes: online 0..nu-1, offline nu..
    live = supp & (online_group[us] < 0) & ~sat[js]
    comp = _components(nu + nv, us[live], nu + js[live])
    roots = {}
    members = []
    for node in range(nu + nv):
        if node < nu:
            if online_group[node] >= 0:
                continue
        elif offline_group[node - nu] >= 0:
            continue
        r = comp[node]
        if r not in roots:
            roots[r] = len(members)
            members.append([])
        members[roots[r]].append(node)

    values = []
    for mem in members:
        off = [n - nu for n in mem if n >= nu]
        values.append(float(cj[off].mean()) if off else 0.0)
    order = np.argsort(np.asarray(values), kind="stable")
    c = [0.0]
    gid = -1
    for idx in order:
        val = values[idx]
        if gid < 0 or abs(val - c[-1]) > MERGE_REL * max(abs(val), abs(c[-1]), 1e-300):
            c.append(val)
            gid = len(c) - 1
        for n in members[idx]:
            if n < nu:
                online_group[n] = gid
            else:
                offline_group[n - nu] = gid
    c = np.asarray(c)

    viol = []
    for l in range(1, c.size):
        V = offline_group == l
        spread = np.abs(cj[V] - c[l]).max(initial=0.0)
        if spread > tol * scale:
            viol.append(f"uniformity: group {l} spread {spread:.3g}")
        U = np.flatnonzero(online_group == l)
        if U.size and rows[U].min() < 1.0 - tol:
            i = int(U[np.argmin(rows[U])])
            viol.append(f"saturation: online {i} in group {l} has row sum {rows[i]:.6g}")
    cu = c[online_group[us]]
    cv = np.where(offline_group[js] > 0, c[np.maximum(offline_group[js], 0)], 0.0)
    bad = cu < cv - tol * scale
    if bad.any():
        e = int(np.flatnonzero(bad)[0])
        viol.append(f"monotonicity: edge ({int(us[e])}, {int(js[e])}) from value {cu[e]:.6g} "
                    f"into value {cv[e]:.6g}")
    return Decomposition(k, online_group, offline_group, c, cj, tol, viol)


@dataclass
class AdwordsDecomposition:
    k: int
    c: np.ndarray
    saturated: np.ndarray
    tol: float
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def decompose_bids(sched, k, us, js, bids, x, nu, w, B, y, tol=None, gap=0.0) -> AdwordsDecomposition:
    """Per-online values c_i for the budgeted (bid-weighted) stage program."""
    w = np.asarray(w, dtype=float)
    B = np.asarray(B, dtype=float)
    x = np.asarray(x, dtype=float)
    nv = w.size
    if tol is None:
        tol = 10.0 * gap + 1e-6
    spent = np.bincount(js, weights=bids * x, minlength=nv)
    load = np.clip((np.asarray(y, dtype=float) + spent) / B, 0.0, 1.0)
    g = w[js] * bids * (1.0 - sched.f(k, load))[js]
    supp = x > EPS_SUP
    rows = np.bincount(us, weights=x, minlength=nu)
    mass = np.bincount(us[supp], weights=x[supp], minlength=nu)
    num = np.bincount(us[supp], weights=(x * g)[supp], minlength=nu)
    c = np.divide(num, mass, out=np.zeros(nu), where=mass > 0)
    scale = max(1.0, float(w.max(initial=0.0)))
    viol = []
    if supp.any():
        dev = np.abs(g[supp] - c[us[supp]])
        e = int(np.argmax(dev))
        if dev[e] > tol * scale:
            viol.append(f"uniformity: online {int(us[supp][e])} spread {dev[e]:.3g}")
    low = c[us] < g - tol * scale
    if low.any():
        e = int(np.flatnonzero(low)[0])
        viol.append(f"monotonicity: edge ({int(us[e])}, {int(js[e])}) value {g[e]:.6g} "
                    f"above c = {c[us[e]]:.6g}")
    unsat = (c > tol * scale) & (rows < 1.0 - tol)
    if unsat.any():
        i = int(np.flatnonzero(unsat)[0])
        viol.append(f"saturation: online {i} has c = {c[i]:.6g} but row sum {rows[i]:.6g}")
    return AdwordsDecomposition(k, c, load >= 1.0 - EPS_SAT, tol, viol)
