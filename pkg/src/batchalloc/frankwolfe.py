"""Frank-Wolfe maximization of the stage programs.

Every stage program in the package has the form

    G(v) = c @ v - sum_g weight_g * F_k(offset_g + (M @ v)_g) + const

over a packing-type polytope {A v <= b, v >= 0}: the linear part collects
prices, the sum collects the regularizer applied to normalized loads.
``PolyObjective`` captures that form once, with analytic gradient and
Hessian, so the solver below does not care which allocation problem it is
working on.

``maximize`` is plain conditional gradient with a warm-started simplex
oracle.  ``refine`` is an optional log-barrier Newton polish used by the
certification suites, which need duality gaps far below what first-order
iterations reach in reasonable time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .regularizers import RegularizerSchedule
from .simplex import LinearProgram, SolverError, Tableau, solve

EXACT = "exact"
OPEN_LOOP = "open-loop"
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class FwConfig:
    max_iters: int = 100
    step: str = EXACT
    eps: float = 1e-6
    refine: bool = False
    refine_gap: float = 1e-10

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.step not in (EXACT, OPEN_LOOP):
            raise ValueError(f"unknown step rule {self.step!r}")


CERTIFY = FwConfig(max_iters=50, eps=1e-12, refine=True)


@dataclass
class PolyObjective:
    schedule: RegularizerSchedule
    k: int
    c: np.ndarray
    M: np.ndarray
    weight: np.ndarray
    offset: np.ndarray
    const: float = 0.0

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.M = np.asarray(self.M, dtype=float).reshape(-1, self.c.size)
        self.weight = np.asarray(self.weight, dtype=float)
        self.offset = np.asarray(self.offset, dtype=float)

    @property
    def linear(self) -> bool:
        return self.k == self.schedule.K or self.M.shape[0] == 0

    def loads(self, v):
        return self.offset + self.M @ v

    def value(self, v) -> float:
        val = float(self.c @ v) + self.const
        if not self.linear:
            val -= float(self.weight @ self.schedule.big_f(self.k, self.loads(v)))
        return val

    def gradient(self, v) -> np.ndarray:
        g = self.c.copy()
        if not self.linear:
            g -= self.M.T @ (self.weight * self.schedule.f(self.k, self.loads(v)))
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient")
        return g

    def hessian(self, v) -> np.ndarray:
        n = self.c.size
        if self.linear:
            return np.zeros((n, n))
        d = self.weight * self.schedule.df(self.k, self.loads(v))
        return -(self.M.T * d) @ self.M

    def segment(self, v, d):
        """phi(t) = G(v + t d) as a cheap closure for the line search."""
        cd = float(self.c @ d)
        base = self.value(v)
        if self.linear:
            return lambda t: base + t * cd
        m = self.schedule.K - self.k
        u0 = self.loads(v)
        du = self.M @ d
        w = self.weight
        F0 = float(w @ self.schedule.big_f(self.k, u0))
        shift = (1.0 - 1.0 / m) ** (m + 1)
        scale = m / (m + 1.0)

        def phi(t):
            u = np.clip(u0 + t * du, 0.0, 1.0)
            F = scale * ((1.0 - (1.0 - u) / m) ** (m + 1) - shift)
            return base + F0 + t * cd - float(w @ F)
        return phi

    def restrict(self, keep: np.ndarray) -> "PolyObjective":
        return PolyObjective(self.schedule, self.k, self.c[keep], self.M[:, keep],
                             self.weight, self.offset, self.const)


@dataclass
class FwResult:
    point: np.ndarray
    value: float
    gap: float
    iters: int
    refined: bool = False
    history: list = field(default_factory=list)


class LinearOracle:
    """argmax_s <g, s> over {A s <= b, s >= 0}, warm-started across calls."""

    def __init__(self, A, b):
        self.tab = Tableau(A, b)
        if not self.tab.feasible:
            raise ValueError("stage polytope is empty")

    def __call__(self, g) -> np.ndarray:
        sol = self.tab.optimize(g)
        if not sol.optimal:
            raise SolverError(f"linear oracle returned {sol.status}")
        return sol.x


def _golden_max(phi, lo=0.0, hi=1.0, iters=60) -> float:
    a, b = lo, hi
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = phi(x1), phi(x2)
    for _ in range(iters):
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = phi(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = phi(x1)
    # the maximizer of a concave function may sit on an endpoint
    best = max(((phi(t), -i, t) for i, t in enumerate((lo, hi, 0.5 * (a + b)))))
    return best[2]


def maximize(obj: PolyObjective, A, b, start=None, cfg: FwConfig = FwConfig(),
             oracle: LinearOracle | None = None) -> FwResult:
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = obj.c.size
    x = np.zeros(n) if start is None else np.asarray(start, dtype=float).copy()
    oracle = oracle or LinearOracle(A, b)
    gap = math.inf
    hist = []
    it = 0
    for it in range(1, cfg.max_iters + 1):
        g = obj.gradient(x)
        s = oracle(g)
        d = s - x
        gap = max(0.0, float(g @ d))
        hist.append(gap)
        if gap <= cfg.eps:
            break
        if cfg.step == OPEN_LOOP:
            step = 2.0 / (it + 1.0)
        elif obj.linear:
            step = 1.0
        else:
            step = _golden_max(obj.segment(x, d))
        x = x + step * d
    else:
        # gap of the final iterate
        g = obj.gradient(x)
        gap = max(0.0, float(g @ (oracle(g) - x)))
    res = FwResult(x, obj.value(x), gap, it, history=hist)
    if cfg.refine and not obj.linear and gap > cfg.refine_gap:
        res = refine(obj, A, b, res, target=cfg.refine_gap, oracle=oracle)
    return res


def fw_gap(obj: PolyObjective, x, oracle: LinearOracle) -> float:
    g = obj.gradient(x)
    return max(0.0, float(g @ (oracle(g) - x)))


# -- barrier polish -------------------------------------------------------

def _forced_zero(A, b, tol=1e-9) -> np.ndarray:
    """Variables pinned to zero by a nonnegative row with zero right-hand side."""
    rows = (b <= tol) & np.all(A >= 0.0, axis=1)
    if not rows.any():
        return np.zeros(A.shape[1], dtype=bool)
    return np.any(A[rows] > 0.0, axis=0)


def _interior_point(A, b):
    """Chebyshev-style strictly interior point of {A v <= b, v >= 0}."""
    m, n = A.shape
    norms = np.linalg.norm(A, axis=1)
    # variables (v, delta): maximize delta
    top = np.hstack([A, norms[:, None]])
    low = np.hstack([-np.eye(n), np.ones((n, 1))])
    cap = np.zeros((1, n + 1))
    cap[0, -1] = 1.0
    AA = np.vstack([top, low, cap])
    bb = np.concatenate([b, np.zeros(n), [1.0]])
    c = np.zeros(n + 1)
    c[-1] = 1.0
    sol = solve(LinearProgram(c, AA, bb))
    if not sol.optimal or sol.x[-1] <= 1e-12:
        return None
    return sol.x[:n]


def _barrier_path(obj: PolyObjective, A, b, v, target):
    m, n = A.shape
    nu = m + n
    t = max(1.0, nu / max(1.0, abs(obj.value(v))))
    t_final = 10.0 * nu / target
    while True:
        for _ in range(100):
            s = b - A @ v
            gs, gv = 1.0 / s, 1.0 / v
            grad = -t * obj.gradient(v) + A.T @ gs - gv
            H = -t * obj.hessian(v) + (A.T * gs ** 2) @ A + np.diag(gv ** 2)
            try:
                step = -np.linalg.solve(H, grad)
            except np.linalg.LinAlgError:
                step = -np.linalg.lstsq(H, grad, rcond=None)[0]
            dec = -float(grad @ step)
            if dec <= 1e-12:
                break
            As = A @ step
            amax = 1.0
            neg = As > 0
            if neg.any():
                amax = min(amax, 0.99 * float((s[neg] / As[neg]).min()))
            neg = step < 0
            if neg.any():
                amax = min(amax, 0.99 * float((-v[neg] / step[neg]).min()))
            phi0 = -t * obj.value(v) - np.log(s).sum() - np.log(v).sum()
            a = amax
            while a > 1e-14:
                vn = v + a * step
                sn = b - A @ vn
                if np.all(sn > 0) and np.all(vn > 0):
                    phin = -t * obj.value(vn) - np.log(sn).sum() - np.log(vn).sum()
                    if phin <= phi0 - 0.25 * a * dec:
                        break
                a *= 0.5
            else:
                break
            v = vn
            if dec <= 1e-10:
                break
        if t >= t_final:
            return v
        t = min(t * 20.0, t_final)


def refine(obj: PolyObjective, A, b, start: FwResult, target=1e-10,
           oracle: LinearOracle | None = None) -> FwResult:
    """Polish a Frank-Wolfe point by following the log-barrier central path.

    The returned point keeps the better of the two objective values; its gap
    is measured with the same linear oracle as the Frank-Wolfe iterations.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    oracle = oracle or LinearOracle(A, b)
    zero = _forced_zero(A, b)
    keep = ~zero
    if not keep.any():
        return start
    Ar = A[:, keep]
    live = np.any(Ar != 0.0, axis=1) | (b < 0)
    Ar, br = Ar[live], b[live]
    sub = obj.restrict(keep)
    v0 = _interior_point(Ar, br)
    if v0 is None:
        return start
    try:
        with np.errstate(all="ignore"):
            v = _barrier_path(sub, Ar, br, v0, target)
    except (FloatingPointError, ValueError, np.linalg.LinAlgError):
        return start
    x = np.zeros_like(start.point)
    x[keep] = v
    val = obj.value(x)
    gap = fw_gap(obj, x, oracle)
    if gap < start.gap:
        return FwResult(x, val, gap, start.iters, True, start.history)
    return start
