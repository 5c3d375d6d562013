import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from batchalloc import baselines as BL, instances as I
from batchalloc.model import make_matching


def _highs_matching(inst):
    edges = [(k, i, j, b) for k in range(inst.K) for i, v in enumerate(inst.stages[k])
             for j, b in zip(v.nbrs, v.bids)]
    w = np.asarray(inst.w)
    c = np.array([w[j] * b for _, _, j, b in edges])
    rows, rhs = [], []
    for k in range(inst.K):
        for i in range(len(inst.stages[k])):
            rows.append([1.0 if (e[0], e[1]) == (k, i) else 0.0 for e in edges])
            rhs.append(1.0)
    for j in range(inst.n_offline):
        rows.append([e[3] if e[2] == j else 0.0 for e in edges])
        rhs.append(inst.B[j])
    res = linprog(-c, A_ub=rows, b_ub=rhs, bounds=[(0, None)] * len(edges), method="highs")
    return -res.fun


@pytest.mark.parametrize("kind", ["vwm", "bmatching", "adwords"])
@pytest.mark.parametrize("seed", range(5))
def test_offline_opt_matches_highs(kind, seed):
    inst = I.gen_random(kind, K=3, n_online=(1, 5), n_offline=4, seed=seed, B=(1, 3))
    assert abs(BL.offline_opt(inst).value - _highs_matching(inst)) < 1e-8


def test_offline_duals_are_feasible():
    inst = I.gen_random("vwm", K=2, n_online=4, n_offline=4, seed=8)
    res = BL.offline_opt(inst)
    a, b = res.duals["alpha"], res.duals["beta"]
    flat = [v for batch in inst.stages for v in batch]
    for i, v in enumerate(flat):
        for j in v.nbrs:
            assert a[i] + b[j] >= inst.w[j] - 1e-9
    assert abs(a.sum() + b.sum() - res.value) < 1e-9


def test_offline_mca_matches_reduction():
    inst = I.gen_random("vwm", K=2, n_online=3, n_offline=3, seed=2)
    assert abs(BL.offline_opt(inst).value - BL.offline_opt(I.to_mca(inst)).value) < 1e-8


def test_greedy_hand_example():
    # batch: vertex 0 -> {0, 1}, vertex 1 -> {0}; w = (1, 1).  Online-GR gives vertex 0 to offline 0
    # (lowest index on ties), so vertex 1 is lost; Batched-GR sees both and matches 2.
    inst = make_matching("vwm", [1.0, 1.0], [1, 1], [[[0, 1], [0]]])
    og = BL.online_greedy(inst)
    bg = BL.batched_greedy(inst)
    assert bg.objective == 2.0
    assert og.objective in (1.0, 2.0)
    assert og.objective <= bg.objective


@pytest.mark.parametrize("seed", range(5))
def test_greedy_below_opt(seed):
    for kind in ("vwm", "mca"):
        inst = I.gen_random(kind, K=2, n_online=(2, 4), n_offline=3, seed=seed)
        opt = BL.offline_opt(inst).value
        for res in (BL.online_greedy(inst), BL.batched_greedy(inst)):
            assert res.objective <= opt + 1e-9
            assert BL.with_ratio(res, opt).ratio <= 1 + 1e-9


def test_single_batch_greedy_is_opt():
    inst = I.gen_random("mca", K=1, n_online=4, n_offline=3, seed=5)
    assert abs(BL.batched_greedy(inst).objective - BL.offline_opt(inst).value) < 1e-9
