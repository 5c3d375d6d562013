"""Price-level regularized configuration allocation with free disposal.

State: eta[j, tau], the impressions advertiser j currently pays for at price
level tau (column 0 is the zero price and stays empty).  Stage k solves

    max  sum w x + sum_{j,tau} w_tau y_{j tau} - sum w_tau eta_{j tau}
         - sum_{j,tau} (w_tau - w_{tau-1}) F_k(H_{j tau})
    s.t. sum x_j + sum_tau y_{j tau} <= 1,  sum_c z_ic <= 1,
         x_icj <= xi_icj z_ic,  y <= eta

where H_{j tau} sums the allocation at price level tau or above.  The last
stage drops the regularizer and is a plain LP.

Two exact reductions keep the programs small.  A configuration with a single
impression triple has no z variable: its constraint folds into the user row
as x / xi.  An advertiser that no configuration of the batch can reach never
disposes (all of its y-gradients are nonnegative), so its y stays at eta and
leaves the program.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frankwolfe import FwConfig, PolyObjective, maximize
from .model import McaInstance, RunTrace, StageSolution, ensure_valid, normalize_mca
from .regularizers import RegularizerSchedule
from .simplex import LinearProgram, SolverError, solve


@dataclass
class McaStage:
    """Variable layout and constraints of one stage program."""

    k: int
    # triples with xi > 0
    t_user: np.ndarray
    t_conf: np.ndarray
    t_adv: np.ndarray
    t_xi: np.ndarray
    t_tau: np.ndarray
    # configurations (global index within the stage)
    c_user: np.ndarray
    c_single: np.ndarray
    # active retention variables
    y_adv: np.ndarray
    y_tau: np.ndarray
    eta: np.ndarray
    n_users: int
    objective: PolyObjective
    A: np.ndarray
    b: np.ndarray
    row_adv: np.ndarray
    row_user: np.ndarray
    row_mu: np.ndarray
    row_pi: np.ndarray
    multi: np.ndarray

    @property
    def n_x(self) -> int:
        return self.t_user.size

    def expand(self, v):
        """Split a program vector into (x, z, y) with y dense over (j, tau)."""
        nx, nm = self.n_x, self.multi.size
        x = v[:nx]
        z = np.zeros(self.c_user.size)
        st = self.c_single[self.t_conf]
        z[self.t_conf[st]] = x[st] / self.t_xi[st]
        z[self.multi] = v[nx:nx + nm]
        y = self.eta.copy()
        y[self.y_adv, self.y_tau] = v[nx + nm:]
        return np.clip(x, 0.0, None), np.clip(z, 0.0, 1.0), np.clip(y, 0.0, None)


def _triples(inst: McaInstance, k: int):
    t_user, t_conf, t_adv, t_xi, t_tau, c_user = [], [], [], [], [], []
    for i, u in enumerate(inst.stages[k - 1]):
        for conf in u.configs:
            c = len(c_user)
            c_user.append(i)
            for a in conf:
                if a.xi > 0:
                    t_user.append(i)
                    t_conf.append(c)
                    t_adv.append(a.j)
                    t_xi.append(a.xi)
                    t_tau.append(a.tau)
    return (np.asarray(t_user, dtype=int), np.asarray(t_conf, dtype=int), np.asarray(t_adv, dtype=int),
            np.asarray(t_xi, dtype=float), np.asarray(t_tau, dtype=int), np.asarray(c_user, dtype=int))


def build_stage(inst: McaInstance, sched: RegularizerSchedule, k: int, eta, linear: bool = False,
                fix_untouched: bool = True, users=None) -> McaStage:
    """Stage program for batch k.  ``linear`` drops the regularizer (greedy LPs).

    ``users`` restricts the batch to a subset of its users (used by the
    one-user-at-a-time greedy baseline).
    """
    eta = np.asarray(eta, dtype=float)
    J, T1 = eta.shape
    wl = inst.price_levels()
    t_user, t_conf, t_adv, t_xi, t_tau, c_user = _triples(inst, k)
    n_users = len(inst.stages[k - 1])
    if users is not None:
        keep_c = np.isin(c_user, users)
        remap = -np.ones(c_user.size, dtype=int)
        remap[keep_c] = np.arange(int(keep_c.sum()))
        keep_t = keep_c[t_conf]
        t_user, t_adv, t_xi, t_tau = t_user[keep_t], t_adv[keep_t], t_xi[keep_t], t_tau[keep_t]
        t_conf = remap[t_conf[keep_t]]
        c_user = c_user[keep_c]
    counts = np.bincount(t_conf, minlength=c_user.size)
    c_single = counts <= 1
    multi = np.flatnonzero(~c_single)

    touched = np.zeros(J, dtype=bool)
    touched[t_adv] = True
    if not fix_untouched:
        touched[:] = True
    ya, yt = np.nonzero((eta > 0) & touched[:, None])
    yt_mask = yt > 0
    ya, yt = ya[yt_mask], yt[yt_mask]

    nx, nm, ny = t_user.size, multi.size, ya.size
    n = nx + nm + ny
    sc = inst.value_scale()
    c = np.concatenate([sc[t_adv] * wl[t_tau], np.zeros(nm), sc[ya] * wl[yt]])
    const = -float((sc[ya] * wl[yt] * eta[ya, yt]).sum())

    # regularizer groups (j, tau) for touched advertisers
    adv = np.flatnonzero(touched)
    T = T1 - 1
    if linear or k == sched.K or adv.size == 0:
        M = np.zeros((0, n))
        weight = np.zeros(0)
        offset = np.zeros(0)
        k_obj = sched.K if linear else k
    else:
        gidx = -np.ones((J, T1), dtype=int)
        gidx[adv, 1:] = np.arange(adv.size * T).reshape(adv.size, T)
        G = adv.size * T
        M = np.zeros((G, n))
        for e in range(nx):
            M[gidx[t_adv[e], 1:t_tau[e] + 1], e] = 1.0
        for q in range(ny):
            M[gidx[ya[q], 1:yt[q] + 1], nx + nm + q] = 1.0
        weight = (sc[adv][:, None] * np.diff(wl)[None, :]).reshape(-1)
        offset = np.zeros(G)
        k_obj = k
    obj = PolyObjective(sched, k_obj, c, M, weight, offset, const)

    # constraints
    n_cfg_users = n_users
    R_adv = J
    R_user = n_cfg_users
    multi_triples = np.flatnonzero(~c_single[t_conf]) if nx else np.zeros(0, dtype=int)
    R_mu = multi_triples.size
    R_pi = ny
    A = np.zeros((R_adv + R_user + R_mu + R_pi, n))
    b = np.concatenate([np.ones(R_adv), np.ones(R_user), np.zeros(R_mu), eta[ya, yt]])
    ar = np.arange(nx)
    A[t_adv, ar] = 1.0
    A[ya, nx + nm + np.arange(ny)] = 1.0
    single_t = c_single[t_conf]
    A[R_adv + t_user[single_t], ar[single_t]] = 1.0 / t_xi[single_t]
    pos = {int(c): q for q, c in enumerate(multi)}
    for q, c in enumerate(multi):
        A[R_adv + c_user[c], nx + q] = 1.0
    for r, e in enumerate(multi_triples):
        A[R_adv + R_user + r, e] = 1.0
        A[R_adv + R_user + r, nx + pos[int(t_conf[e])]] = -t_xi[e]
    A[R_adv + R_user + R_mu + np.arange(ny), nx + nm + np.arange(ny)] = 1.0

    row_adv = np.arange(R_adv)
    row_user = R_adv + np.arange(R_user)
    row_mu = -np.ones(nx, dtype=int)
    row_mu[multi_triples] = R_adv + R_user + np.arange(R_mu)
    row_pi = R_adv + R_user + R_mu + np.arange(R_pi)
    return McaStage(k, t_user, t_conf, t_adv, t_xi, t_tau, c_user, c_single, ya, yt, eta, n_users,
                    obj, A, b, row_adv, row_user, row_mu, row_pi, multi)


def stage_H(stage: McaStage, x, y) -> np.ndarray:
    """H[j, tau]: allocation at price level tau or above (dense, column 0 = total)."""
    J, T1 = stage.eta.shape
    D = y.copy()
    np.add.at(D, (stage.t_adv, stage.t_tau), x)
    D[:, 0] = 0.0
    H = np.cumsum(D[:, ::-1], axis=1)[:, ::-1]
    return H


def next_eta(stage: McaStage, x, y) -> np.ndarray:
    eta = y.copy()
    np.add.at(eta, (stage.t_adv, stage.t_tau), x)
    eta[:, 0] = 0.0
    return eta


def _lp_duals(stage: McaStage, duals):
    """Map simplex duals to (theta, lambda, mu, pi) of the unreduced stage LP."""
    J, T1 = stage.eta.shape
    theta = duals[stage.row_adv].copy()
    lam = duals[stage.row_user].copy()
    mu = np.zeros(stage.n_x)
    has_row = stage.row_mu >= 0
    mu[has_row] = duals[stage.row_mu[has_row]]
    single = ~has_row
    mu[single] = lam[stage.t_user[single]] / stage.t_xi[single]
    pi = np.full((J, T1), np.nan)
    pi[stage.y_adv, stage.y_tau] = duals[stage.row_pi]
    return theta, lam, mu, pi


def solve_stage(stage: McaStage, fw_cfg: FwConfig) -> StageSolution:
    obj = stage.objective
    if obj.linear:
        sol = solve(LinearProgram(obj.c, stage.A, stage.b))
        if not sol.optimal:
            raise SolverError(f"stage LP is {sol.status}")
        v, gap, val, duals, exact = sol.x, 0.0, sol.objective + obj.const, sol.duals, True
    else:
        res = maximize(obj, stage.A, stage.b, cfg=fw_cfg)
        v, gap, val, duals = res.point, res.gap, res.value, None
        exact = res.refined and res.gap <= fw_cfg.refine_gap
    x, z, y = stage.expand(v)
    return StageSolution(stage.k, x, z, y, gap=gap, value=val, duals=duals, exact=exact)


def pr_mca(inst: McaInstance, schedule=None, fw_cfg: FwConfig = FwConfig()) -> RunTrace:
    """Run the regularized configuration allocation over all K stages."""
    ensure_valid(inst)
    inst = normalize_mca(inst)
    sched = RegularizerSchedule(inst.K) if schedule is None else schedule
    if sched.K != inst.K:
        raise ValueError(f"schedule has K={sched.K} but the instance has K={inst.K}")
    eta = np.zeros((inst.n_adv, inst.T + 1))
    trace = RunTrace("pr-mca", inst, states=[eta.copy()],
                     fw={"max_iters": fw_cfg.max_iters, "step": fw_cfg.step, "eps": fw_cfg.eps,
                         "refine": fw_cfg.refine})
    for k in range(1, inst.K + 1):
        last = k == inst.K
        stage = build_stage(inst, sched, k, eta, fix_untouched=not last)
        st = solve_stage(stage, fw_cfg)
        eta = next_eta(stage, st.x, st.y)
        trace.stages.append(st)
        trace.states.append(eta.copy())
    trace.objective = revenue(trace)
    return trace


def revenue(trace: RunTrace) -> float:
    """Total collected payments sum_{j,tau} w_tau eta^(K)_{j tau}."""
    if not trace.states:
        return 0.0
    inst = trace.instance
    eta = trace.states[-1]
    return float((inst.value_scale()[:, None] * eta * inst.price_levels()[None, :]).sum())


def preemptions(trace: RunTrace) -> list:
    """Per stage, the impressions disposed at each price level: eta^(k-1) - y_k."""
    return [np.clip(trace.states[k - 1] - st.y, 0.0, None) for k, st in enumerate(trace.stages, start=1)]
