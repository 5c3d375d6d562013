"""Multi-stage regularized allocation for the matching family.

All four algorithms share one stage program over the stage edges e = (i, j):

    max  sum_e w_j b_e x_e - sum_j w_j B_j F_k((y_j + sum_e b_e x_e) / B_j)
    s.t. sum_j x_ij <= 1            (online rows)
         sum_i b_ij x_ij <= B_j - y_j (offline rows)

With unit bids and capacities this is the vertex-weighted matching program,
with unit bids the b-matching program and with unit weights the AdWords
program.  Stages before the last are solved by Frank-Wolfe; the last stage
is linear and goes straight to the simplex, whose duals are kept for the
certificates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .frankwolfe import FwConfig, PolyObjective, maximize
from .model import MatchingInstance, RunTrace, StageSolution, ensure_valid
from .regularizers import RegularizerSchedule
from .simplex import LinearProgram, SolverError, solve
from .structure import decompose


@dataclass
class StageProgram:
    k: int
    us: np.ndarray
    js: np.ndarray
    bids: np.ndarray
    nu: int
    objective: PolyObjective
    A: np.ndarray
    b: np.ndarray

    def offline_use(self, x) -> np.ndarray:
        """Capacity (or budget) consumed per offline vertex by ``x``."""
        return np.bincount(self.js, weights=self.bids * x, minlength=self.objective.weight.size)


def build_stage(inst: MatchingInstance, sched: RegularizerSchedule, k: int, y, B=None) -> StageProgram:
    us, js, bids = inst.stage_edges(k)
    nu = len(inst.stages[k - 1])
    w = np.asarray(inst.w, dtype=float)
    B = np.asarray(inst.B if B is None else B, dtype=float)
    nv = w.size
    n = us.size
    y = np.asarray(y, dtype=float)
    M = np.zeros((nv, n))
    M[js, np.arange(n)] = bids / B[js]
    obj = PolyObjective(sched, k, w[js] * bids, M, w * B, y / B)
    A = np.zeros((nu + nv, n))
    A[us, np.arange(n)] = 1.0
    A[nu + js, np.arange(n)] = bids
    b = np.concatenate([np.ones(nu), np.maximum(B - y, 0.0)])
    return StageProgram(k, us, js, bids, nu, obj, A, b)


def solve_stage(prog: StageProgram, fw_cfg: FwConfig) -> StageSolution:
    obj = prog.objective
    if prog.k == obj.schedule.K:
        sol = solve(LinearProgram(obj.c, prog.A, prog.b))
        if not sol.optimal:
            raise SolverError(f"last-stage LP is {sol.status}")
        return StageSolution(prog.k, sol.x, value=sol.objective, duals=sol.duals, exact=True)
    res = maximize(obj, prog.A, prog.b, cfg=fw_cfg)
    return StageSolution(prog.k, res.point, gap=res.gap, value=res.value,
                         exact=res.refined and res.gap <= fw_cfg.refine_gap)


def _schedule(inst, schedule):
    if schedule is None:
        return RegularizerSchedule(inst.K)
    if schedule.K != inst.K:
        raise ValueError(f"schedule has K={schedule.K} but the instance has K={inst.K}")
    return schedule


def _require(inst, kinds):
    ensure_valid(inst)
    if inst.kind not in kinds:
        raise ValueError(f"expected a {' or '.join(kinds)} instance, got {inst.kind}")


def _run_fractional(algo, inst, schedule, fw_cfg, B=None) -> RunTrace:
    sched = _schedule(inst, schedule)
    B_run = np.asarray(inst.B if B is None else B, dtype=float)
    y = np.zeros(inst.n_offline)
    trace = RunTrace(algo, inst, states=[y.copy()],
                     fw={"max_iters": fw_cfg.max_iters, "step": fw_cfg.step, "eps": fw_cfg.eps,
                         "refine": fw_cfg.refine})
    total = 0.0
    for k in range(1, inst.K + 1):
        prog = build_stage(inst, sched, k, y, B_run)
        st = solve_stage(prog, fw_cfg)
        y = np.minimum(y + prog.offline_use(st.x), B_run)
        total += float(prog.objective.c @ st.x)
        trace.stages.append(st)
        trace.states.append(y.copy())
    trace.objective = total
    return trace


def pr_mwm(inst: MatchingInstance, schedule=None, fw_cfg: FwConfig = FwConfig()) -> RunTrace:
    """Regularized multi-stage vertex-weighted matching."""
    _require(inst, ("vwm",))
    return _run_fractional("pr-mwm", inst, schedule, fw_cfg)


def pr_f_adwords(inst: MatchingInstance, schedule=None, fw_cfg: FwConfig = FwConfig()) -> RunTrace:
    """Regularized multi-stage fractional budgeted allocation."""
    _require(inst, ("adwords",))
    return _run_fractional("pr-f-adwords", inst, schedule, fw_cfg)


def _round_groups(prog: StageProgram, dec, x, room) -> np.ndarray:
    """Integral vertex of the per-group rounding LP (flows stay inside groups)."""
    us, js = prog.us, prog.js
    xr = np.zeros_like(x)
    same = dec.online_group[us] == dec.offline_group[js]
    for l in range(dec.L + 1):
        edges = np.flatnonzero(same & (dec.online_group[us] == l))
        if edges.size == 0:
            continue
        U = np.unique(us[edges])
        V = np.unique(js[edges])
        ui = {int(i): r for r, i in enumerate(U)}
        vi = {int(j): r for r, j in enumerate(V)}
        s = np.bincount([vi[int(j)] for j in js[edges]], weights=x[edges], minlength=V.size)
        for snap in (1e-7, 0.0):
            lo = np.floor(s + snap)
            hi = np.minimum(lo + 1.0, np.floor(room[V] + 1e-9))
            lo = np.minimum(lo, hi)
            n = edges.size
            A = np.zeros((U.size + 2 * V.size, n))
            for col, e in enumerate(edges):
                A[ui[int(us[e])], col] = 1.0
                A[U.size + vi[int(js[e])], col] = 1.0
                A[U.size + V.size + vi[int(js[e])], col] = -1.0
            b = np.concatenate([np.ones(U.size), hi, -lo])
            sol = solve(LinearProgram(np.ones(n), A, b))
            if sol.optimal:
                break
        else:
            raise SolverError(f"rounding LP for group {l} is {sol.status}")
        xr[edges] = np.round(sol.x)
        if np.abs(sol.x - xr[edges]).max(initial=0.0) > 1e-7:
            raise SolverError("rounding LP returned a fractional vertex")
    return xr


def pr_mwbm(inst: MatchingInstance, schedule=None, fw_cfg: FwConfig = FwConfig(),
            integral: bool = False) -> RunTrace:
    """Regularized multi-stage b-matching, fractional or TUM-rounded."""
    _require(inst, ("bmatching", "vwm"))
    if not integral:
        return _run_fractional("pr-mwbm", inst, schedule, fw_cfg)
    sched = _schedule(inst, schedule)
    B = np.asarray(inst.B, dtype=float)
    w = np.asarray(inst.w, dtype=float)
    yhat = np.zeros(inst.n_offline)
    trace = RunTrace("pr-mwbm-int", inst, states=[yhat.copy()], integral=[], integral_states=[yhat.copy()],
                     fw={"max_iters": fw_cfg.max_iters, "step": fw_cfg.step, "eps": fw_cfg.eps,
                         "refine": fw_cfg.refine})
    total = 0.0
    for k in range(1, inst.K + 1):
        prog = build_stage(inst, sched, k, yhat, B)
        st = solve_stage(prog, fw_cfg)
        if k < inst.K:
            dec = decompose(sched, k, prog.us, prog.js, st.x, prog.nu, w, B, yhat, gap=st.gap)
            xr = _round_groups(prog, dec, st.x, B - yhat)
        else:
            # the last-stage LP is a b-matching LP with integral data, so its vertex is integral
            xr = np.round(st.x)
            if np.abs(st.x - xr).max(initial=0.0) > 1e-7:
                raise SolverError("last-stage LP vertex is not integral")
        trace.states.append(np.minimum(yhat + prog.offline_use(st.x), B))
        yhat = yhat + prog.offline_use(xr)
        total += float(prog.objective.c @ xr)
        trace.stages.append(st)
        trace.integral.append(xr)
        trace.integral_states.append(yhat.copy())
    trace.objective = total
    return trace


def default_rho(B_min: float) -> float:
    if B_min <= 1.0:
        return 0.5
    return min(0.5, math.sqrt(2.0 * math.log(B_min) / B_min))


@dataclass(frozen=True)
class AdwordsRoundingConfig:
    rho: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.rho is not None and not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")


def sample_adwords(inst: MatchingInstance, trace: RunTrace, seed: int):
    """Randomized rounding of a fractional budgeted-allocation trace.

    Online vertex i of stage k draws one neighbour with probabilities
    x_{k,i.} (it stays unmatched with the leftover probability) using a
    generator keyed by (seed, k, i).  The draw is granted only when the bid
    still fits the true budget.  Returns (objective, per-stage x, spent).
    """
    B = np.asarray(inst.B, dtype=float)
    spent = np.zeros(inst.n_offline)
    xs = []
    total = 0.0
    for k, st in enumerate(trace.stages, start=1):
        us, js, bids = inst.stage_edges(k)
        xr = np.zeros_like(st.x)
        starts = np.searchsorted(us, np.arange(len(inst.stages[k - 1]) + 1))
        for i in range(len(inst.stages[k - 1])):
            lo, hi = starts[i], starts[i + 1]
            if lo == hi:
                continue
            u = np.random.default_rng(np.random.SeedSequence([seed, k, i])).random()
            cum = np.cumsum(np.clip(st.x[lo:hi], 0.0, 1.0))
            pick = int(np.searchsorted(cum, u, side="right"))
            if pick >= hi - lo:
                continue
            e = lo + pick
            j = js[e]
            if spent[j] + bids[e] <= B[j]:
                spent[j] += bids[e]
                xr[e] = 1.0
                total += bids[e]
        xs.append(xr)
    return total, xs, spent


def pr_i_adwords(inst: MatchingInstance, schedule=None, fw_cfg: FwConfig = FwConfig(),
                 rounding: AdwordsRoundingConfig = AdwordsRoundingConfig()) -> RunTrace:
    """Integral budgeted allocation: trimmed-budget fractional run plus sampling."""
    _require(inst, ("adwords",))
    B = np.asarray(inst.B, dtype=float)
    rho = default_rho(float(B.min())) if rounding.rho is None else rounding.rho
    trace = _run_fractional("pr-i-adwords", inst, schedule, fw_cfg, B=(1.0 - rho) * B)
    total, xs, _ = sample_adwords(inst, trace, rounding.seed)
    states = [np.zeros(inst.n_offline)]
    for k, xr in enumerate(xs, start=1):
        us, js, bids = inst.stage_edges(k)
        states.append(states[-1] + np.bincount(js, weights=bids * xr, minlength=inst.n_offline))
    trace.fractional_objective = trace.objective
    trace.objective = total
    trace.integral = xs
    trace.integral_states = states
    trace.seed = rounding.seed
    trace.rho = rho
    return trace
