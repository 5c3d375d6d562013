"""Instance generators, the matching-to-configuration reduction and JSON I/O.

JSON layout (field names are fixed, unknown fields are rejected)::

    {"kind": "vwm" | "bmatching" | "adwords",
     "K": int,
     "offline": [{"w": float, "B": float}, ...],
     "stages": [[{"edges": [{"j": int, "b": float}, ...]}, ...], ...]}

    {"kind": "mca",
     "K": int,
     "advertisers": [{"n": float}, ...],
     "prices": [float, ...],            # price levels 1..T, increasing
     "stages": [[{"configs": [{"alloc": [{"j": int, "xi": float, "tau": int}]}]}]]}

The edge field "b" is optional outside AdWords (it defaults to 1).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .model import (Alloc, InstanceError, MatchingInstance, McaInstance, Online, RunTrace,
                    StageSolution, User, denormalize_mca, ensure_valid, make_matching,
                    normalize_mca)

# -- tightness construction -------------------------------------------------


@dataclass(frozen=True)
class TightnessSpec:
    K: int
    N: int
    seed: int
    perm: tuple[int, ...]
    sizes: tuple[int, ...]

    @property
    def n_offline(self) -> int:
        return sum(self.sizes)

    def level_sizes(self) -> list[int]:
        """|V_k|: the number of offline vertices adjacent to batch k."""
        K, s = self.K, self.sizes
        return [K * s[k] for k in range(K - 1)] + [s[-1]]


def tightness_sizes(K: int, N: int) -> list[int]:
    if K < 1 or N < 1:
        raise ValueError("K and N must be positive")
    sizes = [int(round(((K - 1) / K) ** (k - 1) * N)) for k in range(1, K)]
    last = K * N - sum(sizes)
    sizes.append(last)
    if min(sizes) < 1:
        raise ValueError(f"batch sizes {sizes} contain an empty batch; choose a larger N")
    levels = [K * s for s in sizes[:-1]] + [last]
    if any(a < b for a, b in zip(levels, levels[1:])) or levels[0] != K * N:
        raise ValueError(f"batch sizes {sizes} do not give nested neighbourhoods")
    return sizes


def gen_tightness(K: int, N: int | None = None, seed: int = 0):
    """Unit-weight hard instance under a uniformly random offline relabelling.

    Returns (instance, spec).  Batch k < K sees the offline vertices whose
    rank is at most K |U_k|, the last batch those of rank at most |U_K|.
    """
    N = K ** K if N is None else int(N)
    sizes = tightness_sizes(K, N)
    n = K * N
    perm = np.random.default_rng(seed).permutation(n) + 1  # perm[j] = rank of offline j
    spec = TightnessSpec(K, N, seed, tuple(int(p) for p in perm), tuple(sizes))
    stages = []
    for k, size in enumerate(sizes, start=1):
        limit = K * size if k < K else size
        nbrs = [int(j) for j in np.flatnonzero(perm <= limit)]
        stages.append([nbrs] * size)
    inst = make_matching("vwm", [1.0] * n, [1.0] * n, stages)
    return inst, spec


def gen_tightness_permuted(K: int, N: int | None, perm) -> MatchingInstance:
    N = K ** K if N is None else int(N)
    sizes = tightness_sizes(K, N)
    perm = np.asarray(perm)
    stages = []
    for k, size in enumerate(sizes, start=1):
        limit = K * size if k < K else size
        stages.append([[int(j) for j in np.flatnonzero(perm <= limit)]] * size)
    n = K * N
    return make_matching("vwm", [1.0] * n, [1.0] * n, stages)


# -- auction benchmark generator ---------------------------------------------

_FIELDS = {"prices": 1, "mu": 2, "tau_user": 3, "tau_pair": 4, "pools": 5}


def _stream(seed: int, name: str) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), _FIELDS[name]])))


@dataclass(frozen=True)
class AuctionSpec:
    advertisers: int = 20
    users: int = 100
    demand: float = 5.0
    T: int = 20
    configs: int = 5
    per_config: int = 3
    symmetric: bool = True
    K: int = 2
    seed: int = 0


def gen_auction(spec: AuctionSpec) -> McaInstance:
    """Second-price display-ad instance with a finite price universe."""
    J, U, T = spec.advertisers, spec.users, spec.T
    u = _stream(spec.seed, "prices").random(T)
    prices = np.sort(-np.log1p(-u))
    mu = np.sort(_stream(spec.seed, "mu").uniform(1.0, 2.0, J))
    tau_user = _stream(spec.seed, "tau_user").uniform(0.0, T / 3.0, U)
    tau_pair = _stream(spec.seed, "tau_pair").uniform(0.0, T / 3.0, (U, J))
    level = np.clip(np.ceil(tau_user[:, None] + tau_pair * mu[None, :]), 1, T).astype(int)
    pool_rng = _stream(spec.seed, "pools")
    users = []
    for i in range(U):
        if spec.symmetric:
            pool = np.arange(J)
        else:
            cut = (17 * (i + 1)) // 100
            pool = np.arange(min(cut, J - spec.per_config), J)
        confs = []
        for _ in range(spec.configs):
            pick = np.sort(pool_rng.choice(pool, size=spec.per_config, replace=False))
            lv = level[i, pick]
            order = np.lexsort((pick, -lv))  # highest level first, lowest index on ties
            winner = int(pick[order[0]])
            second = int(lv[order[1]]) if pick.size > 1 else int(lv[order[0]])
            confs.append(tuple(Alloc(int(j), 1.0 if int(j) == winner else 0.0, second) for j in pick))
        users.append(User(tuple(confs)))
    size = math.ceil(U / spec.K)
    stages = [tuple(users[s:s + size]) for s in range(0, U, size)]
    if len(stages) != spec.K:
        raise ValueError(f"{U} users cannot be split into {spec.K} nonempty batches of {size}")
    inst = McaInstance(spec.K, (float(spec.demand),) * J, tuple(float(p) for p in prices), tuple(stages))
    return ensure_valid(inst)


def rebatch(inst, K: int):
    """Same online sequence, split into K contiguous batches of ceil(n/K)."""
    flat = [u for batch in inst.stages for u in batch]
    size = math.ceil(len(flat) / K)
    stages = [flat[s:s + size] for s in range(0, len(flat), size)]
    if len(stages) != K:
        raise ValueError(f"{len(flat)} online vertices cannot be split into {K} batches")
    return inst.with_stages(stages, K=K)


# -- reduction ---------------------------------------------------------------


def to_mca(inst: MatchingInstance) -> McaInstance:
    """Vertex-weighted matching as configuration allocation: one configuration per edge."""
    ensure_valid(inst)
    if inst.kind != "vwm":
        raise ValueError("only unit-capacity vertex-weighted instances reduce to configurations")
    w = np.asarray(inst.w, dtype=float)
    prices = sorted({float(x) for x in w if x > 0})
    level = {p: t + 1 for t, p in enumerate(prices)}
    stages = []
    for batch in inst.stages:
        users = []
        for v in batch:
            confs = tuple((Alloc(int(j), 1.0, level[float(w[j])]),) for j in v.nbrs if w[j] > 0)
            users.append(User(confs))
        stages.append(tuple(users))
    return McaInstance(inst.K, (1.0,) * inst.n_offline, tuple(prices), tuple(stages))


# -- random batteries --------------------------------------------------------


def gen_random(kind: str, K: int = 2, n_online=4, n_offline: int = 4, density: float = 0.6,
               seed: int = 0, B=1, T: int = 3, n_configs: int = 2, budget=None):
    """Random valid instance of the given kind.

    ``n_online`` is the batch size (an int, a per-batch list or a (lo, hi)
    range drawn per batch).  ``B`` is the b-matching capacity (int or
    (lo, hi) range); ``budget`` the AdWords budget range.  For "mca",
    ``n_offline`` counts advertisers and ``T`` price levels.
    """
    rng = np.random.default_rng(seed)
    if isinstance(n_online, tuple):
        sizes = [int(rng.integers(n_online[0], n_online[1] + 1)) for _ in range(K)]
    elif isinstance(n_online, (list, np.ndarray)):
        sizes = [int(s) for s in n_online]
    else:
        sizes = [int(n_online)] * K
    if kind == "mca":
        return _random_mca(rng, K, sizes, n_offline, T, n_configs, density)
    nv = n_offline
    stages, bids = [], []
    for s in sizes:
        batch, bb = [], []
        for _ in range(s):
            nb = [j for j in range(nv) if rng.random() < density]
            if not nb:
                nb = [int(rng.integers(nv))]
            batch.append(nb)
            bb.append([float(rng.uniform(0.05, 1.0)) for _ in nb])
        stages.append(batch)
        bids.append(bb)
    if kind == "vwm":
        return make_matching("vwm", rng.uniform(0.1, 1.0, nv), [1.0] * nv, stages, K)
    if kind == "bmatching":
        if isinstance(B, tuple):
            caps = rng.integers(B[0], B[1] + 1, nv).astype(float)
        else:
            caps = np.full(nv, float(B))
        return make_matching("bmatching", rng.uniform(0.1, 1.0, nv), caps, stages, K)
    if kind == "adwords":
        lo, hi = budget if budget is not None else (0.5, 2.0)
        return make_matching("adwords", [1.0] * nv, rng.uniform(lo, hi, nv), stages, K, bids=bids)
    raise ValueError(f"unknown kind {kind!r}")


def _random_mca(rng, K, sizes, J, T, n_configs, density) -> McaInstance:
    prices = np.sort(rng.uniform(0.1, 1.0, T))
    while np.any(np.diff(prices) <= 1e-6):
        prices = np.sort(rng.uniform(0.1, 1.0, T))
    stages = []
    for s in sizes:
        users = []
        for _ in range(s):
            confs = []
            for _ in range(int(rng.integers(1, n_configs + 1))):
                advs = [j for j in range(J) if rng.random() < density] or [int(rng.integers(J))]
                confs.append(tuple(Alloc(j, float(rng.uniform(0.1, 1.0)), int(rng.integers(1, T + 1)))
                                   for j in advs))
            users.append(User(tuple(confs)))
        stages.append(tuple(users))
    return ensure_valid(McaInstance(K, (1.0,) * J, tuple(float(p) for p in prices), tuple(stages)))


# -- JSON ----------------------------------------------------------------------


def _exact_keys(obj, required, optional=(), where="instance"):
    if not isinstance(obj, dict):
        raise InstanceError(f"{where}: expected an object")
    keys = set(obj)
    missing = set(required) - keys
    extra = keys - set(required) - set(optional)
    if missing:
        raise InstanceError(f"{where}: missing field(s) {sorted(missing)}")
    if extra:
        raise InstanceError(f"{where}: unknown field(s) {sorted(extra)}")


def instance_to_dict(inst) -> dict:
    if inst.kind == "mca":
        inst = denormalize_mca(inst)
        return {
            "kind": "mca",
            "K": inst.K,
            "advertisers": [{"n": n} for n in inst.n],
            "prices": list(inst.prices),
            "stages": [[{"configs": [{"alloc": [{"j": a.j, "xi": a.xi, "tau": a.tau} for a in conf]}
                                     for conf in u.configs]} for u in batch] for batch in inst.stages],
        }
    adw = inst.kind == "adwords"
    return {
        "kind": inst.kind,
        "K": inst.K,
        "offline": [{"w": w, "B": B} for w, B in zip(inst.w, inst.B)],
        "stages": [[{"edges": [({"j": j, "b": b} if adw else {"j": j}) for j, b in zip(v.nbrs, v.bids)]}
                    for v in batch] for batch in inst.stages],
    }


def instance_from_dict(d: dict):
    if not isinstance(d, dict) or "kind" not in d:
        raise InstanceError("instance: missing field 'kind'")
    kind = d["kind"]
    if kind == "mca":
        _exact_keys(d, ("kind", "K", "advertisers", "prices", "stages"))
        advs = []
        for a in d["advertisers"]:
            _exact_keys(a, ("n",), where="advertiser")
            advs.append(float(a["n"]))
        stages = []
        for batch in d["stages"]:
            users = []
            for u in batch:
                _exact_keys(u, ("configs",), where="user")
                confs = []
                for c in u["configs"]:
                    _exact_keys(c, ("alloc",), where="configuration")
                    allocs = []
                    for a in c["alloc"]:
                        _exact_keys(a, ("j", "xi", "tau"), where="allocation")
                        allocs.append(Alloc(int(a["j"]), float(a["xi"]), int(a["tau"])))
                    confs.append(tuple(allocs))
                users.append(User(tuple(confs)))
            stages.append(tuple(users))
        inst = McaInstance(int(d["K"]), tuple(advs), tuple(float(p) for p in d["prices"]), tuple(stages))
        return ensure_valid(inst)
    _exact_keys(d, ("kind", "K", "offline", "stages"))
    w, B = [], []
    for o in d["offline"]:
        _exact_keys(o, ("w", "B"), where="offline vertex")
        w.append(float(o["w"]))
        B.append(float(o["B"]))
    stages = []
    for batch in d["stages"]:
        row = []
        for v in batch:
            _exact_keys(v, ("edges",), where="online vertex")
            nbrs, bids = [], []
            for e in v["edges"]:
                _exact_keys(e, ("j",), ("b",), where="edge")
                nbrs.append(int(e["j"]))
                bids.append(float(e.get("b", 1.0)))
            row.append(Online(tuple(nbrs), tuple(bids)))
        stages.append(tuple(row))
    inst = MatchingInstance(kind, int(d["K"]), tuple(w), tuple(B), tuple(stages))
    return ensure_valid(inst)


def dumps(inst) -> str:
    return json.dumps(instance_to_dict(inst), separators=(",", ":"))


def loads(text: str):
    return instance_from_dict(json.loads(text))


def save(inst, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(inst))
        fh.write("\n")


def load(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


# -- traces --------------------------------------------------------------------


def _arr(a):
    if a is None:
        return None
    a = np.asarray(a, dtype=float)
    return np.where(np.isnan(a), None, a).tolist() if np.isnan(a).any() else a.tolist()


def _unarr(a):
    if a is None:
        return None
    return np.array([[np.nan if v is None else v for v in r] for r in a], dtype=float) \
        if a and isinstance(a[0], list) else np.array([np.nan if v is None else v for v in a], dtype=float)


def trace_to_dict(trace: RunTrace) -> dict:
    return {
        "algo": trace.algo,
        "instance": instance_to_dict(trace.instance),
        "objective": trace.objective,
        "fractional_objective": trace.fractional_objective,
        "seed": trace.seed,
        "rho": trace.rho,
        "fw": trace.fw,
        "stages": [{"k": s.k, "x": _arr(s.x), "z": _arr(s.z), "y": _arr(s.y), "gap": s.gap,
                    "value": s.value, "duals": _arr(s.duals), "exact": s.exact} for s in trace.stages],
        "states": [_arr(s) for s in trace.states],
        "integral": None if trace.integral is None else [_arr(x) for x in trace.integral],
        "integral_states": None if trace.integral_states is None else [_arr(x) for x in trace.integral_states],
    }


def trace_from_dict(d: dict) -> RunTrace:
    inst = instance_from_dict(d["instance"])
    if inst.kind == "mca":
        inst = normalize_mca(inst)
    stages = [StageSolution(s["k"], _unarr(s["x"]), _unarr(s["z"]), _unarr(s["y"]), s["gap"], s["value"],
                            _unarr(s["duals"]), s["exact"]) for s in d["stages"]]
    tr = RunTrace(d["algo"], inst, stages, [_unarr(s) for s in d["states"]], d["objective"], d["seed"],
                  None if d["integral"] is None else [_unarr(x) for x in d["integral"]],
                  None if d["integral_states"] is None else [_unarr(x) for x in d["integral_states"]],
                  d["rho"], d["fractional_objective"], d["fw"])
    return tr


def save_trace(trace: RunTrace, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(trace_to_dict(trace), fh)
        fh.write("\n")


def load_trace(path) -> RunTrace:
    with open(path, encoding="utf-8") as fh:
        return trace_from_dict(json.load(fh))
