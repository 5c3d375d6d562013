"""Offline optima and the two greedy comparison policies.

Online-GR serves one online vertex (user) at a time and solves the LP that
maximizes the immediate gain for it alone; for configuration allocation the
LP may dispose of previously retained impressions.  Batched-GR does the same
for a whole batch at once.  Both therefore coincide with the regularized
algorithms run with every stage treated as the last one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import matching_algs, mca_alg
from .model import McaInstance, MatchingInstance, ensure_valid, normalize_mca
from .regularizers import RegularizerSchedule
from .simplex import LinearProgram, SolverError, solve

_UNIT = RegularizerSchedule(1)


@dataclass
class OfflineResult:
    value: float
    primal: np.ndarray
    duals: dict


@dataclass
class PolicyResult:
    policy: str
    objective: float
    stage_values: list = field(default_factory=list)
    ratio: float = float("nan")


def _merged(inst):
    users = tuple(u for batch in inst.stages for u in batch)
    return inst.with_stages([users], K=1)


def offline_opt(inst) -> OfflineResult:
    """Exact optimum of the in-hindsight LP, with its dual solution."""
    ensure_valid(inst)
    if inst.kind == "mca":
        flat = _merged(normalize_mca(inst))
        stage = mca_alg.build_stage(flat, _UNIT, 1, np.zeros((flat.n_adv, flat.T + 1)),
                                    linear=True, fix_untouched=False)
        sol = solve(LinearProgram(stage.objective.c, stage.A, stage.b))
        if not sol.optimal:
            raise SolverError(f"offline LP is {sol.status}")
        theta, lam, mu, _ = mca_alg._lp_duals(stage, sol.duals)
        return OfflineResult(sol.objective, sol.x, {"alpha": lam, "beta": theta, "gamma": mu})
    flat = _merged(inst)
    prog = matching_algs.build_stage(flat, _UNIT, 1, np.zeros(flat.n_offline))
    sol = solve(LinearProgram(prog.objective.c, prog.A, prog.b))
    if not sol.optimal:
        raise SolverError(f"offline LP is {sol.status}")
    return OfflineResult(sol.objective, sol.x,
                         {"alpha": sol.duals[:prog.nu], "beta": sol.duals[prog.nu:]})


def _ratio(value, opt):
    return value / opt if opt > 0 else 1.0


def _matching_greedy(inst: MatchingInstance, per_vertex: bool) -> PolicyResult:
    y = np.zeros(inst.n_offline)
    stage_values = []
    for k in range(1, inst.K + 1):
        batch = inst.stages[k - 1]
        groups = [[v] for v in batch] if per_vertex else [list(batch)]
        gain = 0.0
        for g in groups:
            sub = inst.with_stages([g], K=1)
            prog = matching_algs.build_stage(sub, _UNIT, 1, y)
            sol = solve(LinearProgram(prog.objective.c, prog.A, prog.b))
            if not sol.optimal:
                raise SolverError(f"greedy LP is {sol.status}")
            y = np.minimum(y + prog.offline_use(sol.x), np.asarray(inst.B, dtype=float))
            gain += sol.objective
        stage_values.append(gain)
    return PolicyResult("", float(sum(stage_values)), stage_values)


def _mca_greedy(inst: McaInstance, per_user: bool) -> PolicyResult:
    inst = normalize_mca(inst)
    eta = np.zeros((inst.n_adv, inst.T + 1))
    stage_values = []
    for k in range(1, inst.K + 1):
        groups = [[i] for i in range(len(inst.stages[k - 1]))] if per_user else [None]
        gain = 0.0
        for users in groups:
            stage = mca_alg.build_stage(inst, _UNIT, k, eta, linear=True, users=users)
            sol = solve(LinearProgram(stage.objective.c, stage.A, stage.b))
            if not sol.optimal:
                raise SolverError(f"greedy LP is {sol.status}")
            x, _, yv = stage.expand(sol.x)
            eta = mca_alg.next_eta(stage, x, yv)
            gain += sol.objective + stage.objective.const
        stage_values.append(gain)
    value = float((inst.value_scale()[:, None] * eta * inst.price_levels()[None, :]).sum())
    return PolicyResult("", value, stage_values)


def online_greedy(inst) -> PolicyResult:
    """Online-GR: one online vertex at a time, batch order then index order."""
    ensure_valid(inst)
    res = _mca_greedy(inst, True) if inst.kind == "mca" else _matching_greedy(inst, True)
    res.policy = "online-gr"
    return res


def batched_greedy(inst) -> PolicyResult:
    """Batched-GR: the unregularized stage LP for each batch."""
    ensure_valid(inst)
    res = _mca_greedy(inst, False) if inst.kind == "mca" else _matching_greedy(inst, False)
    res.policy = "batched-gr"
    return res


def with_ratio(res: PolicyResult, opt: float) -> PolicyResult:
    res.ratio = _ratio(res.objective, opt)
    return res
