"""Instance, solution and trace types shared by all algorithms.

Matching-family instances (``vwm``, ``bmatching``, ``adwords``) store offline
weights ``w`` and capacities/budgets ``B``; every online vertex carries an
adjacency list with one bid per edge (bids are 1 outside AdWords).

Configuration-allocation instances (``mca``) store advertiser demands, the
sorted price universe (1-based price levels, level 0 is the implicit price
0) and, per user, a list of configurations.  Every allocation entry is a
triple (advertiser j, impression count xi, price level tau).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

MATCHING_KINDS = ("vwm", "bmatching", "adwords")
KINDS = MATCHING_KINDS + ("mca",)


class InstanceError(ValueError):
    """An instance violates one of its invariants."""


@dataclass(frozen=True)
class Online:
    nbrs: tuple[int, ...]
    bids: tuple[float, ...]


@dataclass(frozen=True)
class MatchingInstance:
    kind: str
    K: int
    w: tuple[float, ...]
    B: tuple[float, ...]
    stages: tuple[tuple[Online, ...], ...]

    @property
    def n_offline(self) -> int:
        return len(self.w)

    def batch_sizes(self) -> list[int]:
        return [len(s) for s in self.stages]

    def stage_edges(self, k: int):
        """Edges of stage k (1-based) as arrays (online index, offline index, bid)."""
        us, js, bs = [], [], []
        for i, v in enumerate(self.stages[k - 1]):
            us.extend([i] * len(v.nbrs))
            js.extend(v.nbrs)
            bs.extend(v.bids)
        return (np.asarray(us, dtype=int), np.asarray(js, dtype=int),
                np.asarray(bs, dtype=float))

    def with_stages(self, stages, K=None) -> "MatchingInstance":
        return MatchingInstance(self.kind, self.K if K is None else K, self.w, self.B,
                                tuple(tuple(s) for s in stages))


@dataclass(frozen=True)
class Alloc:
    j: int
    xi: float
    tau: int


@dataclass(frozen=True)
class User:
    configs: tuple[tuple[Alloc, ...], ...]


@dataclass(frozen=True)
class McaInstance:
    K: int
    n: tuple[float, ...]
    prices: tuple[float, ...]
    stages: tuple[tuple[User, ...], ...]
    # value of one normalized unit of advertiser j (its original demand); None means 1
    scale: Optional[tuple[float, ...]] = None
    kind: str = field(default="mca", init=False)

    @property
    def n_adv(self) -> int:
        return len(self.n)

    @property
    def T(self) -> int:
        return len(self.prices)

    def value_scale(self) -> np.ndarray:
        return np.ones(len(self.n)) if self.scale is None else np.asarray(self.scale, dtype=float)

    def price_levels(self) -> np.ndarray:
        """Prices with the implicit level 0 prepended: index tau -> w_tau."""
        return np.concatenate([[0.0], np.asarray(self.prices, dtype=float)])

    def batch_sizes(self) -> list[int]:
        return [len(s) for s in self.stages]

    def with_stages(self, stages, K=None) -> "McaInstance":
        return McaInstance(self.K if K is None else K, self.n, self.prices,
                           tuple(tuple(s) for s in stages), self.scale)


def make_matching(kind, w, B, stages, K=None, bids=None) -> MatchingInstance:
    """Build a matching-family instance from plain adjacency lists.

    ``stages`` is a list of batches, each a list of neighbour lists; ``bids``
    (AdWords only) mirrors that nesting with one bid per neighbour.
    """
    batches = []
    for k, batch in enumerate(stages):
        row = []
        for i, nbrs in enumerate(batch):
            nb = tuple(int(j) for j in nbrs)
            if bids is None:
                bd = (1.0,) * len(nb)
            else:
                bd = tuple(float(x) for x in bids[k][i])
            row.append(Online(nb, bd))
        batches.append(tuple(row))
    inst = MatchingInstance(kind, len(batches) if K is None else int(K),
                            tuple(float(x) for x in w), tuple(float(x) for x in B),
                            tuple(batches))
    ensure_valid(inst)
    return inst


def validate(inst) -> Optional[str]:
    """Return the first violated invariant (with its location), or None."""
    if inst.kind not in KINDS:
        return f"unknown kind {inst.kind!r}"
    if int(inst.K) != inst.K or inst.K < 1:
        return f"K must be a positive integer, got {inst.K!r}"
    if len(inst.stages) != inst.K:
        return f"expected {inst.K} batches, found {len(inst.stages)}"
    for k, batch in enumerate(inst.stages, start=1):
        if len(batch) == 0:
            return f"empty batch {k}"
    if inst.kind == "mca":
        return _validate_mca(inst)
    return _validate_matching(inst)


def _validate_matching(inst: MatchingInstance) -> Optional[str]:
    nv = len(inst.w)
    if len(inst.B) != nv:
        return "offline weight and capacity lists differ in length"
    for j, (w, B) in enumerate(zip(inst.w, inst.B)):
        if not np.isfinite(w) or w < 0:
            return f"offline {j}: negative or non-finite weight {w}"
        if not np.isfinite(B) or B <= 0:
            return f"offline {j}: capacity must be positive, got {B}"
        if inst.kind == "vwm" and B != 1:
            return f"offline {j}: vertex-weighted matching needs unit capacity, got {B}"
        if inst.kind == "bmatching" and (B < 1 or B != int(B)):
            return f"offline {j}: b-matching capacity must be an integer >= 1, got {B}"
    for k, batch in enumerate(inst.stages, start=1):
        for i, v in enumerate(batch):
            if len(v.nbrs) != len(v.bids):
                return f"stage {k} online {i}: neighbour and bid lists differ in length"
            if len(set(v.nbrs)) != len(v.nbrs):
                return f"stage {k} online {i}: duplicate neighbour"
            for j, b in zip(v.nbrs, v.bids):
                if not 0 <= j < nv:
                    return f"stage {k} online {i}: edge endpoint {j} out of range"
                if not np.isfinite(b) or b < 0:
                    return f"stage {k} online {i}: negative bid {b} on edge to {j}"
                if inst.kind == "adwords" and b > 1:
                    return f"stage {k} online {i}: bid {b} on edge to {j} exceeds 1"
    return None


def _validate_mca(inst: McaInstance) -> Optional[str]:
    J, T = len(inst.n), len(inst.prices)
    for j, n in enumerate(inst.n):
        if not np.isfinite(n) or n <= 0:
            return f"advertiser {j}: demand must be positive, got {n}"
    if inst.scale is not None and (len(inst.scale) != J or min(inst.scale) <= 0):
        return "value scale must be positive, one entry per advertiser"
    p = np.asarray(inst.prices, dtype=float)
    if T and (p[0] <= 0 or np.any(np.diff(p) <= 0) or not np.all(np.isfinite(p))):
        return "price universe must be positive and strictly increasing"
    for k, batch in enumerate(inst.stages, start=1):
        for i, u in enumerate(batch):
            for c, conf in enumerate(u.configs):
                seen = set()
                for a in conf:
                    where = f"stage {k} user {i} config {c}"
                    if not 0 <= a.j < J:
                        return f"{where}: advertiser {a.j} out of range"
                    if a.j in seen:
                        return f"{where}: advertiser {a.j} listed twice"
                    seen.add(a.j)
                    if not np.isfinite(a.xi) or a.xi < 0:
                        return f"{where}: negative impression count {a.xi}"
                    if int(a.tau) != a.tau or not 1 <= a.tau <= T:
                        return f"{where}: off-universe price level {a.tau}"
    return None


def ensure_valid(inst):
    err = validate(inst)
    if err is not None:
        raise InstanceError(err)
    return inst


def normalize_mca(inst: McaInstance) -> McaInstance:
    """Rescale to unit demands: xi -> xi / n_j.

    Prices are untouched; the original demand becomes the value of one
    normalized unit (``scale``), so every allocation keeps its revenue.
    """
    ensure_valid(inst)
    n = inst.n
    if any(x <= 0 for x in n):
        raise ValueError("demand must be positive")
    if all(x == 1 for x in n):
        return inst
    stages = []
    for batch in inst.stages:
        stages.append(tuple(
            User(tuple(tuple(Alloc(a.j, a.xi / n[a.j], a.tau) for a in conf) for conf in u.configs))
            for u in batch))
    scale = tuple(float(a) * b for a, b in zip(n, inst.value_scale()))
    return McaInstance(inst.K, (1.0,) * len(n), inst.prices, tuple(stages), scale)


def denormalize_mca(inst: McaInstance) -> McaInstance:
    """Inverse of ``normalize_mca``: fold the value scale back into demands."""
    if inst.scale is None:
        return inst
    s = inst.scale
    stages = tuple(
        tuple(User(tuple(tuple(Alloc(a.j, a.xi * s[a.j], a.tau) for a in conf) for conf in u.configs))
              for u in batch)
        for batch in inst.stages)
    return McaInstance(inst.K, tuple(n * x for n, x in zip(inst.n, s)), inst.prices, stages)


@dataclass
class StageSolution:
    """Allocation of one stage.

    Matching variants: ``x`` is indexed like ``MatchingInstance.stage_edges``.
    MCA: ``x`` is indexed like ``McaStage.triples``, ``z`` like
    ``McaStage.configs`` and ``y`` is a dense (advertiser, level) array
    (column 0, the zero price, is unused).
    """

    k: int
    x: np.ndarray
    z: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
    gap: float = 0.0
    value: float = 0.0
    duals: Optional[np.ndarray] = None
    exact: bool = False


@dataclass
class RunTrace:
    algo: str
    instance: object
    stages: list = field(default_factory=list)
    # states[k] is the capacity (or eta) state after stage k; states[0] is the start
    states: list = field(default_factory=list)
    objective: float = 0.0
    seed: Optional[int] = None
    integral: Optional[list] = None
    integral_states: Optional[list] = None
    rho: Optional[float] = None
    fractional_objective: Optional[float] = None
    fw: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return self.instance.K

    @property
    def fw_gap_max(self) -> float:
        gaps = [s.gap for s in self.stages]
        return max(gaps) if gaps else 0.0
