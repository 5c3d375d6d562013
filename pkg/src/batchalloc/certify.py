"""Runtime dual certificates for the regularized multi-stage algorithms.

Each ``certify_*`` function rebuilds, stage by stage, a dual solution of the
in-hindsight LP from a run trace: group values (or KKT multipliers) of the
regularized stages and the simplex duals of the last stage.  The dual value
must match the algorithm's objective, and every dual constraint must hold up
to the factor Gamma(K).  A passing report is therefore a per-instance proof
that the run was Gamma(K)-competitive against the LP bound.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import mca_alg
from .matching_algs import build_stage as build_matching_stage
from .model import RunTrace
from .regularizers import RegularizerSchedule, gamma
from .structure import EPS_SUP, Decomposition, decompose, decompose_bids

TOL = 1e-3
DISPOSAL_TOL = 1e-4


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    tol: float
    witness: str = ""


@dataclass
class DualCertificate:
    """Dual assignment built from a trace: alpha per stage, beta, gamma per stage (MCA)."""

    alpha: list
    beta: np.ndarray
    gamma: list | None = None

    def to_dict(self) -> dict:
        return {"alpha": [np.asarray(a).tolist() for a in self.alpha], "beta": np.asarray(self.beta).tolist(),
                "gamma": None if self.gamma is None else [np.asarray(g).tolist() for g in self.gamma]}


@dataclass
class CertReport:
    algo: str
    K: int
    primal: float
    dual: float
    objective_residual: float
    worst_slack: float
    checks: list = field(default_factory=list)
    certificate: DualCertificate | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "certificate"}
        d["checks"] = [asdict(c) for c in self.checks]
        d["passed"] = self.passed
        d["certificate"] = None if self.certificate is None else self.certificate.to_dict()
        return d


def _sched(trace, schedule):
    return RegularizerSchedule(trace.instance.K) if schedule is None else schedule


def _objective_check(primal, dual, tol):
    res = abs(dual - primal) / max(1.0, abs(primal))
    return res, Check("objective", res <= tol, res, tol, f"primal {primal:.9g} dual {dual:.9g}")


def _nonneg_check(*arrays):
    low = min((float(np.min(a)) for a in arrays if np.size(a)), default=0.0)
    return Check("nonnegative", low >= -1e-9, low, 1e-9)


# -- polynomial inequality and tightness -------------------------------------


def poly_lhs(sched: RegularizerSchedule, k: int, x: float, ys) -> float:
    """(1 - x) f_k(y_k + x) - sum_{s<k} (y_{s+1} - y_s) f_s(y_{s+1}), ys = (y_1, ..., y_k)."""
    ys = np.asarray(ys, dtype=float)
    val = (1.0 - x) * sched.f(k, min(1.0, ys[-1] + x))
    for s in range(1, k):
        val -= (ys[s] - ys[s - 1]) * sched.f(s, ys[s])
    return float(val)


def check_poly_inequality(K: int, samples: int, seed: int = 0) -> float:
    """Largest LHS - (1 - 1/K)^K over random admissible tuples (should be <= 0)."""
    if K < 2:
        raise ValueError("the inequality needs K >= 2")
    sched = RegularizerSchedule(K)
    rhs = (1.0 - 1.0 / K) ** K
    rng = np.random.default_rng(seed)
    worst = -np.inf
    ks = rng.integers(1, K, samples)
    xs = rng.random(samples)
    for k in range(1, K):
        idx = np.flatnonzero(ks == k)
        if idx.size == 0:
            continue
        x = xs[idx]
        ys = np.zeros((idx.size, k))
        if k > 1:
            ys[:, 1:] = np.sort(rng.random((idx.size, k - 1)), axis=1) * (1.0 - x)[:, None]
        val = (1.0 - x) * sched.f(k, np.minimum(1.0, ys[:, -1] + x))
        for s in range(1, k):
            val = val - (ys[:, s] - ys[:, s - 1]) * sched.f(s, ys[:, s])
        worst = max(worst, float((val - rhs).max()))
    return worst


def tightness_dual_value(K: int, N: int, sizes) -> float:
    """Objective mu + sum_k |U_k| zeta_k of the explicit factor-revealing dual."""
    sizes = [int(s) for s in sizes]
    if len(sizes) != K or min(sizes) < 1 or sum(sizes) != K * N:
        raise ValueError(f"batch sizes {sizes} are inconsistent with K={K}, N={N}")
    levels = [K * s for s in sizes[:-1]] + [sizes[-1]]
    if levels[0] != K * N or any(a < b for a, b in zip(levels, levels[1:])):
        raise ValueError(f"batch sizes {sizes} do not give nested neighbourhoods")
    mu = levels[-1]
    zeta = [(v - levels[-1]) / v for v in levels]
    return float(mu + sum(u * z for u, z in zip(sizes, zeta)))


# -- matching family -----------------------------------------------------------


def decompose_vwm(sol, y, schedule, k, instance, tol=None) -> Decomposition:
    us, js, _ = instance.stage_edges(k)
    nu = len(instance.stages[k - 1])
    return decompose(schedule, k, us, js, sol.x, nu, instance.w, instance.B, y, tol=tol, gap=sol.gap)


def decompose_adwords(sol, y, schedule, k, instance, B=None, tol=None):
    us, js, bids = instance.stage_edges(k)
    nu = len(instance.stages[k - 1])
    B = instance.B if B is None else B
    return decompose_bids(schedule, k, us, js, bids, sol.x, nu, instance.w, B, y, tol=tol, gap=sol.gap)


def _structure_checks(decs, tol):
    checks = []
    for name in ("uniformity", "monotonicity", "saturation"):
        msgs = [f"stage {d.k}: {v}" for d in decs for v in d.violations if v.startswith(name)]
        checks.append(Check(name, not msgs, float(len(msgs)), tol, msgs[0] if msgs else ""))
    return checks


def _last_stage(trace, sched, B_eff, y_last):
    inst = trace.instance
    K = inst.K
    st = trace.stages[K - 1]
    prog = build_matching_stage(inst, sched, K, y_last, B_eff)
    nu = prog.nu
    a_hat, b_hat = st.duals[:nu], st.duals[nu:]
    return a_hat, (1.0 - y_last / B_eff) * b_hat


def _edge_feasibility(inst, alphas, beta, target, tol, bid_scaled):
    """min over edges of alpha_i + b beta_j - target * w_j b (and pass flag)."""
    w = np.asarray(inst.w, dtype=float)
    worst, witness, ok = np.inf, "", True
    for k in range(1, inst.K + 1):
        us, js, bids = inst.stage_edges(k)
        if us.size == 0:
            continue
        b = bids if bid_scaled else np.ones_like(bids)
        lhs = alphas[k - 1][us] + b * beta[js]
        rhs = w[js] * b
        slack = lhs - target * rhs
        e = int(np.argmin(slack))
        if slack[e] < worst:
            worst = float(slack[e])
            witness = f"stage {k} edge ({int(us[e])}, {int(js[e])})"
        ok &= bool(np.all(slack >= -tol * rhs - 1e-12))
    return worst, witness, ok


def _report(trace, primal, alphas, beta, B, target, tol_obj, tol_feas, bid_scaled, extra=()):
    inst = trace.instance
    dual = float(sum(a.sum() for a in alphas) + (np.asarray(B) * beta).sum())
    res, obj_check = _objective_check(primal, dual, tol_obj)
    worst, witness, ok = _edge_feasibility(inst, alphas, beta, target, tol_feas, bid_scaled)
    checks = [obj_check, Check("feasibility", ok, worst, tol_feas, witness), _nonneg_check(beta, *alphas)]
    checks.extend(extra)
    return CertReport(trace.algo, inst.K, primal, dual, res, worst, checks, DualCertificate(alphas, beta))


def certify_vwm(trace: RunTrace, schedule=None, instance=None, tol_obj=TOL, tol_feas=TOL,
                structure: bool = False) -> CertReport:
    """Certificate for a fractional (b-)matching trace.

    Stages before the last: alpha_i = c^(l) of the group of i and
    Delta beta_j = (load_j / B_j) (w_j - c^(l(j))).  Last stage: the LP duals,
    with beta scaled by the residual capacity fraction.  ``structure`` adds the
    decomposition properties to the pass criteria.
    """
    inst = instance or trace.instance
    sched = _sched(trace, schedule)
    w = np.asarray(inst.w, dtype=float)
    B = np.asarray(inst.B, dtype=float)
    beta = np.zeros(inst.n_offline)
    alphas, decs = [], []
    for k in range(1, inst.K):
        st = trace.stages[k - 1]
        y = trace.states[k - 1]
        dec = decompose_vwm(st, y, sched, k, inst)
        decs.append(dec)
        us, js, _ = inst.stage_edges(k)
        s = np.bincount(js, weights=st.x, minlength=inst.n_offline)
        cv = dec.c[dec.offline_group]
        alphas.append(dec.c[dec.online_group])
        beta = beta + (s / B) * (w - cv)
    a_hat, db = _last_stage(trace, sched, B, trace.states[inst.K - 1])
    alphas.append(a_hat)
    beta = beta + db
    extra = _structure_checks(decs, 1e-4) if structure else ()
    return _report(trace, trace.objective, alphas, beta, B, gamma(inst.K), tol_obj, tol_feas, False, extra)


def certify_adwords(trace: RunTrace, schedule=None, instance=None, tol_obj=TOL, tol_feas=TOL,
                    structure: bool = False) -> CertReport:
    """Certificate for a fractional budgeted-allocation trace (bid-scaled constraints)."""
    inst = instance or trace.instance
    sched = _sched(trace, schedule)
    w = np.asarray(inst.w, dtype=float)
    B = np.asarray(inst.B, dtype=float)
    beta = np.zeros(inst.n_offline)
    alphas, decs = [], []
    for k in range(1, inst.K):
        st = trace.stages[k - 1]
        y0, y1 = trace.states[k - 1], trace.states[k]
        dec = decompose_adwords(st, y0, sched, k, inst)
        decs.append(dec)
        alphas.append(dec.c)
        beta = beta + w * ((y1 - y0) / B) * sched.f(k, np.clip(y1 / B, 0.0, 1.0))
    a_hat, db = _last_stage(trace, sched, B, trace.states[inst.K - 1])
    alphas.append(a_hat)
    beta = beta + db
    extra = _structure_checks(decs, 1e-4) if structure else ()
    return _report(trace, trace.objective, alphas, beta, B, gamma(inst.K), tol_obj, tol_feas, True, extra)


def certify_bmatching_integral(trace: RunTrace, schedule=None, instance=None, tol_obj=TOL,
                               tol_feas=TOL) -> CertReport:
    """Certificate for a TUM-rounded b-matching trace, target Gamma(K) - 3 / B_min."""
    inst = instance or trace.instance
    sched = _sched(trace, schedule)
    w = np.asarray(inst.w, dtype=float)
    B = np.asarray(inst.B, dtype=float)
    beta = np.zeros(inst.n_offline)
    alphas = []
    for k in range(1, inst.K):
        st = trace.stages[k - 1]
        y0, y1 = trace.integral_states[k - 1], trace.integral_states[k]
        dec = decompose_vwm(st, y0, sched, k, inst)
        dy = y1 - y0
        fk = sched.f(k, np.clip((y1 - 1.0) / B, 0.0, 1.0))
        nu = len(inst.stages[k - 1])
        alpha = np.zeros(nu)
        for l in range(dec.L + 1):
            U, V = dec.U(l), dec.V(l)
            if U.size:
                alpha[U] = float((dy[V] * (1.0 - fk[V]) * w[V]).sum()) / U.size
        alphas.append(alpha)
        beta = beta + (dy / B) * fk * w
    a_hat, db = _last_stage(trace, sched, B, trace.integral_states[inst.K - 1])
    alphas.append(a_hat)
    beta = beta + db
    target = gamma(inst.K) - 3.0 / float(B.min())
    return _report(trace, trace.objective, alphas, beta, B, target, tol_obj, tol_feas, False)


# -- configuration allocation ----------------------------------------------------


@dataclass
class KktBundle:
    k: int
    lam: np.ndarray
    theta: np.ndarray
    mu: np.ndarray
    psi: np.ndarray
    phi: np.ndarray
    pi: np.ndarray | None = None
    residuals: dict = field(default_factory=dict)


def _config_sums(stage, v):
    """Per configuration: sum over its triples of xi * v."""
    return np.bincount(stage.t_conf, weights=stage.t_xi * v, minlength=stage.c_user.size)


def _max_per_user(stage, vals):
    out = np.zeros(stage.n_users)
    if vals.size:
        np.maximum.at(out, stage.c_user, vals)
    return out


def recover_kkt_mca(sol, eta_prev, schedule, k, instance, stage=None) -> KktBundle:
    """Multipliers of a regularized MCA stage from the stationarity conditions."""
    sched = schedule
    stage = stage or mca_alg.build_stage(instance, sched, k, eta_prev)
    sc = instance.value_scale()
    wl = instance.price_levels()
    dw = np.diff(wl)
    x, z, y = sol.x, sol.z, sol.y
    H = mca_alg.stage_H(stage, x, y)
    fH = sched.f(k, np.clip(H[:, 1:], 0.0, 1.0))
    cum = np.cumsum(dw[None, :] * fH, axis=1)  # cum[j, t-1] = sum_{tau <= t} dw f(H)
    P = cum[stage.t_adv, stage.t_tau - 1]
    g = sc[stage.t_adv] * (wl[stage.t_tau] - P)
    mu = np.maximum(g, 0.0)
    psi = np.maximum(-g, 0.0)
    cs = _config_sums(stage, mu)
    lam = _max_per_user(stage, cs)
    phi = lam[stage.c_user] - cs
    # gradient of the retention variables
    gy = sc[:, None] * (wl[None, 1:] - cum)
    used = np.bincount(stage.c_user, weights=z, minlength=stage.n_users)
    xz = np.clip(stage.t_xi * z[stage.t_conf] - x, 0.0, None)
    supp = x > EPS_SUP
    # theta is pinned by stationarity only on variables strictly inside their
    # bounds: x below xi z (or with an unsaturated user) and 0 < y < eta
    free_x = supp & ((~stage.c_single[stage.t_conf] & (xz > EPS_SUP))
                     | (used[stage.t_user] < 1.0 - EPS_SUP))
    ys, es = y[:, 1:], eta_prev[:, 1:]
    free_y = (ys > EPS_SUP) & (ys < es - EPS_SUP)
    J = eta_prev.shape[0]
    theta = np.zeros(J)
    for j in range(J):
        cand = np.concatenate([g[free_x & (stage.t_adv == j)], gy[j][free_y[j]]])
        if cand.size:
            theta[j] = max(0.0, float(cand.min()))
    # with theta = 0 the retention gradient must vanish inside, be <= 0 at 0 and >= 0 at eta
    ry = np.where(free_y, np.abs(gy), 0.0)
    ry = np.maximum(ry, np.where(ys <= EPS_SUP, np.maximum(gy, 0.0), 0.0) * (es > EPS_SUP))
    ry = np.maximum(ry, np.where(ys >= es - EPS_SUP, np.maximum(-gy, 0.0), 0.0) * (es > EPS_SUP)
                    * (ys > EPS_SUP))
    res = {
        "stationarity": float(psi[supp].max(initial=0.0)),
        "retention": float(ry.max(initial=0.0)),
        "psi_x": float((psi * x).max(initial=0.0)),
        "phi_z": float((phi * z).max(initial=0.0)),
        "mu_slack": float((mu * xz).max(initial=0.0)),
        "lambda_slack": float((lam * np.clip(1.0 - used, 0.0, None)).max(initial=0.0)),
    }
    return KktBundle(k, lam, theta, mu, psi, phi, None, res)


def certify_mca(trace: RunTrace, schedule=None, instance=None, tol=TOL) -> CertReport:
    """Certificate for a PR-MCA trace: checks (a) objective, (b) gamma + beta,
    (c) alpha against every configuration, (d) last-stage price facts, plus
    theta = 0, the KKT residuals and the disposal order of the regularized stages."""
    inst = instance or trace.instance
    sched = _sched(trace, schedule)
    K = inst.K
    sc = inst.value_scale()
    wl = inst.price_levels()
    J = inst.n_adv
    beta = np.zeros(J)
    alphas, gammas, stages = [], [], []
    theta_max, theta_w = 0.0, ""
    kkt_worst, kkt_w = 0.0, ""
    disp_worst, disp_w = 0.0, ""
    for k in range(1, K):
        st = trace.stages[k - 1]
        eta_prev = trace.states[k - 1]
        stage = mca_alg.build_stage(inst, sched, k, eta_prev)
        kkt = recover_kkt_mca(st, eta_prev, sched, k, inst, stage)
        stages.append(stage)
        alphas.append(kkt.lam)
        gammas.append(kkt.mu)
        P = sc[stage.t_adv] * wl[stage.t_tau] - (kkt.mu - kkt.psi)
        gain = np.bincount(stage.t_adv, weights=st.x * P, minlength=J)
        disposed = (sc[:, None] * wl[None, :] * (eta_prev - st.y)).sum(axis=1)
        beta = beta + gain - disposed
        j = int(np.argmax(kkt.theta))
        if kkt.theta[j] > theta_max:
            theta_max, theta_w = float(kkt.theta[j]), f"stage {k} advertiser {j}"
        H = mca_alg.stage_H(stage, st.x, st.y)
        tail = np.cumsum((eta_prev - st.y)[:, ::-1], axis=1)[:, ::-1][:, 1:]
        fH = sched.f(k, np.clip(H[:, 1:], 0.0, 1.0))
        held = np.cumsum(eta_prev[:, ::-1], axis=1)[:, ::-1][:, 1:]
        disp = max(float(np.abs(tail * (1.0 - fH)).max(initial=0.0)),
                   float((held - H[:, 1:]).max(initial=0.0)))
        if disp > disp_worst:
            disp_worst, disp_w = disp, f"stage {k}"
        for name, val in kkt.residuals.items():
            if val > kkt_worst:
                kkt_worst, kkt_w = val, f"stage {k} {name}"

    # last stage: exact LP duals
    st = trace.stages[K - 1]
    eta_prev = trace.states[K - 1]
    stage = mca_alg.build_stage(inst, sched, K, eta_prev, fix_untouched=False)
    stages.append(stage)
    theta, lam, mu, pi = mca_alg._lp_duals(stage, st.duals)
    price = sc[:, None] * wl[None, :]
    pi = np.where(np.isnan(pi), np.maximum(0.0, price - theta[:, None]), pi)
    alphas.append(lam)
    gammas.append(mu)
    beta = beta + theta - (eta_prev[:, 1:] * (price[:, 1:] - pi[:, 1:])).sum(axis=1)

    # (d) price facts of the last stage
    price_worst, price_w = 0.0, ""
    for j in range(J):
        for t in range(1, wl.size):
            e = eta_prev[j, t]
            if e <= EPS_SUP:
                continue
            if price[j, t] <= theta[j]:
                r = abs(e * pi[j, t])
            else:
                r = abs(e * (price[j, t] - pi[j, t]) - e * theta[j])
            if r > price_worst:
                price_worst, price_w = r, f"advertiser {j} level {t}"

    primal = trace.objective
    dual = float(sum(a.sum() for a in alphas) + beta.sum())
    res, obj_check = _objective_check(primal, dual, tol)
    G = gamma(K)

    # (b) gamma + beta >= Gamma w over every triple, (c) alpha >= sum xi gamma per configuration
    worst_b, wb, ok_b = np.inf, "", True
    worst_c, wc = np.inf, ""
    for k, stage in enumerate(stages, start=1):
        if stage.n_x:
            wt = sc[stage.t_adv] * wl[stage.t_tau]
            slack = gammas[k - 1] + beta[stage.t_adv] - G * wt
            e = int(np.argmin(slack))
            if slack[e] < worst_b:
                worst_b, wb = float(slack[e]), f"stage {k} triple {e}"
            ok_b &= bool(np.all(slack >= -tol * wt - 1e-12))
        cs = _config_sums(stage, gammas[k - 1])
        if cs.size:
            slack_c = alphas[k - 1][stage.c_user] - cs
            c = int(np.argmin(slack_c))
            if slack_c[c] < worst_c:
                worst_c, wc = float(slack_c[c]), f"stage {k} configuration {c}"
    # zero-impression triples receive gamma = w, which satisfies (b) with equality margin
    worst_c = 0.0 if worst_c == np.inf else worst_c
    checks = [
        obj_check,
        Check("feasibility", ok_b, worst_b, tol, wb),
        Check("configuration", worst_c >= -tol, worst_c, tol, wc),
        Check("last_stage_prices", price_worst <= tol, price_worst, tol, price_w),
        Check("theta_zero", theta_max <= tol, theta_max, tol, theta_w),
        Check("kkt_residuals", kkt_worst <= tol, kkt_worst, tol, kkt_w),
        Check("disposal", disp_worst <= DISPOSAL_TOL, disp_worst, DISPOSAL_TOL, disp_w),
        _nonneg_check(beta, *alphas, *gammas),
    ]
    return CertReport(trace.algo, K, primal, dual, res, worst_b, checks, DualCertificate(alphas, beta, gammas))


def certify_adwords_trimmed(trace: RunTrace, schedule=None, **kw) -> CertReport:
    """Certificate of the fractional part of an integral budgeted-allocation run.

    The fractional program ran against budgets (1 - rho) B, so it is certified
    on that trimmed instance with its own (pre-sampling) objective.
    """
    inst = trace.instance
    trimmed = replace(inst, B=tuple((1.0 - trace.rho) * float(b) for b in inst.B))
    frac = replace(trace, instance=trimmed, objective=trace.fractional_objective)
    return certify_adwords(frac, schedule, **kw)


def certify(trace: RunTrace, schedule=None, **kw) -> CertReport:
    """Pick the certificate matching the algorithm that produced ``trace``."""
    algo = trace.algo
    if algo in ("pr-mwm", "pr-mwbm"):
        return certify_vwm(trace, schedule, **kw)
    if algo == "pr-mwbm-int":
        return certify_bmatching_integral(trace, schedule, **kw)
    if algo == "pr-f-adwords":
        return certify_adwords(trace, schedule, **kw)
    if algo == "pr-i-adwords":
        return certify_adwords_trimmed(trace, schedule, **kw)
    if algo == "pr-mca":
        return certify_mca(trace, schedule, **kw)
    raise ValueError(f"no certificate for algorithm {algo!r}")
