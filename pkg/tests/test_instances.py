import numpy as np
import pytest

from batchalloc import baselines as BL, instances as I
from batchalloc.model import validate


def test_tightness_sizes():
    assert I.tightness_sizes(2, 4) == [4, 4]
    assert I.tightness_sizes(3, 27) == [27, 18, 36]
    assert sum(I.tightness_sizes(4, 256)) == 4 * 256
    with pytest.raises(ValueError):
        I.tightness_sizes(2, 0)


def test_tightness_k1_complete():
    inst, spec = I.gen_tightness(1, 3)
    assert inst.batch_sizes() == [3] and all(len(v.nbrs) == 3 for v in inst.stages[0])


@pytest.mark.parametrize("K,N", [(2, 4), (3, 27), (3, 9)])
def test_tightness_nested(K, N):
    inst, spec = I.gen_tightness(K, N, seed=5)
    nb = [set(inst.stages[k][0].nbrs) for k in range(K)]
    for a, b in zip(nb, nb[1:]):
        assert b <= a
    for k in range(K):
        assert len(nb[k]) == spec.level_sizes()[k]
    assert spec.level_sizes()[:-1] == [K * s for s in spec.sizes[:-1]]
    assert spec.level_sizes()[-1] == spec.sizes[-1]
    # a perfect matching exists: offline OPT = |V|
    assert abs(BL.offline_opt(inst).value - K * N) < 1e-9


def test_tightness_k2_construction():
    inst, spec = I.gen_tightness(2, 4, seed=0)
    assert inst.n_offline == 8 and inst.batch_sizes() == [4, 4]
    rank = np.asarray(spec.perm)
    assert set(inst.stages[1][0].nbrs) == set(np.flatnonzero(rank <= 4).tolist())


def test_auction_deterministic_and_second_price():
    a = I.gen_auction(I.AuctionSpec(seed=4))
    b = I.gen_auction(I.AuctionSpec(seed=4))
    assert I.dumps(a) == I.dumps(b)
    assert validate(a) is None and a.K == 2 and a.batch_sizes() == [50, 50]
    p = np.asarray(a.prices)
    assert np.all(np.diff(p) > 0) and len(p) == 20
    for batch in a.stages:
        for u in batch:
            assert len(u.configs) == 5
            for conf in u.configs:
                assert len(conf) == 3
                assert sum(1 for x in conf if x.xi > 0) == 1
                assert len({x.tau for x in conf}) == 1  # everyone sees the second price


def test_auction_fields_are_independent():
    a = I.gen_auction(I.AuctionSpec(seed=1))
    b = I.gen_auction(I.AuctionSpec(seed=1, K=5))
    assert a.prices == b.prices
    flat_a = [u for s in a.stages for u in s]
    flat_b = [u for s in b.stages for u in s]
    assert flat_a == flat_b and b.batch_sizes() == [20] * 5


def test_auction_asymmetric_pool():
    inst = I.gen_auction(I.AuctionSpec(symmetric=False, seed=2))
    last = inst.stages[-1][-1]  # user i = 100 (1-based)
    for conf in last.configs:
        assert all(x.j >= 17 for x in conf)


def test_auction_lp_bound():
    for s in range(3):
        inst = I.gen_auction(I.AuctionSpec(seed=s, users=30, advertisers=8))
        assert BL.offline_opt(inst).value >= BL.batched_greedy(inst).objective - 1e-9


def test_to_mca_examples():
    from batchalloc.model import make_matching
    one = I.to_mca(make_matching("vwm", [2.0], [1], [[[0]]]))
    assert one.prices == (2.0,)
    (conf,) = one.stages[0][0].configs
    assert conf[0].xi == 1.0 and conf[0].tau == 1
    two = I.to_mca(make_matching("vwm", [1.0, 2.0], [1, 1], [[[0, 1], [0, 1]]]))
    assert sum(len(u.configs) for u in two.stages[0]) == 4
    with pytest.raises(ValueError):
        I.to_mca(I.gen_random("adwords", K=1, seed=0))


def test_rebatch():
    inst = I.gen_random("vwm", K=1, n_online=6, seed=0)
    r = I.rebatch(inst, 3)
    assert r.batch_sizes() == [2, 2, 2]
    with pytest.raises(ValueError):
        I.rebatch(inst, 7)


@pytest.mark.parametrize("kind", ["vwm", "bmatching", "adwords", "mca"])
def test_random_valid(kind):
    for s in range(5):
        assert validate(I.gen_random(kind, K=3, n_online=(1, 4), seed=s, B=(1, 4))) is None


def test_trace_roundtrip(tmp_path):
    from batchalloc import mca_alg
    tr = mca_alg.pr_mca(I.gen_random("mca", K=2, seed=1))
    p = tmp_path / "t.json"
    I.save_trace(tr, p)
    back = I.load_trace(p)
    assert back.objective == tr.objective and back.algo == "pr-mca"
    for s1, s2 in zip(tr.stages, back.stages):
        assert np.array_equal(s1.x, s2.x) and np.array_equal(s1.y, s2.y)
        if s1.duals is not None:
            assert np.array_equal(s1.duals, s2.duals)
