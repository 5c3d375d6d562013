"""Polynomial regularizers f_k, their primitives F_k and the ratio Gamma(K).

For a K-stage schedule and stage k < K, with m = K - k,

    f_k(x) = (1 - (1 - x) / m) ** m
    F_k(x) = m / (m + 1) * [(1 - (1 - x) / m) ** (m + 1) - (1 - 1 / m) ** (m + 1)]

The last stage uses the indicator f_K(x) = 1{x = 1} and F_K = 0, which turns
the last stage program into a linear program.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EPS_IND = 1e-12
# how far outside [0, 1] an argument may drift from rounding before we complain
_X_SLACK = 1e-7


def gamma(K: int) -> float:
    """Competitive ratio 1 - (1 - 1/K)^K of a K-stage schedule."""
    if int(K) != K or K < 1:
        raise ValueError(f"K must be a positive integer, got {K!r}")
    K = int(K)
    return 1.0 - (1.0 - 1.0 / K) ** K


def _check_x(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("regularizer argument is not finite")
    if arr.size and (arr.min() < -_X_SLACK or arr.max() > 1.0 + _X_SLACK):
        raise ValueError(f"regularizer argument outside [0, 1]: [{arr.min()}, {arr.max()}]")
    return np.clip(arr, 0.0, 1.0)


def _scalar_or_array(out, x):
    return float(out) if np.ndim(x) == 0 else out


@dataclass(frozen=True)
class RegularizerSchedule:
    """The stage-indexed regularizers of a K-stage schedule."""

    K: int

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"K must be a positive integer, got {self.K!r}")

    @property
    def gamma(self) -> float:
        return gamma(self.K)

    def _check_k(self, k: int) -> int:
        if int(k) != k or not 1 <= k <= self.K:
            raise ValueError(f"stage index {k!r} outside [1, {self.K}]")
        return int(k)

    def f(self, k: int, x):
        k = self._check_k(k)
        xs = _check_x(x)
        if k == self.K:
            out = (np.abs(xs - 1.0) <= EPS_IND).astype(float)
        else:
            m = self.K - k
            out = (1.0 - (1.0 - xs) / m) ** m
        return _scalar_or_array(out, x)

    def big_f(self, k: int, x):
        k = self._check_k(k)
        xs = _check_x(x)
        if k == self.K:
            out = np.zeros_like(xs)
        else:
            m = self.K - k
            out = m / (m + 1.0) * ((1.0 - (1.0 - xs) / m) ** (m + 1) - (1.0 - 1.0 / m) ** (m + 1))
        return _scalar_or_array(out, x)

    def df(self, k: int, x):
        """Derivative of f_k (zero for the last-stage indicator)."""
        k = self._check_k(k)
        xs = _check_x(x)
        if k == self.K:
            out = np.zeros_like(xs)
        else:
            m = self.K - k
            out = (1.0 - (1.0 - xs) / m) ** (m - 1)
        return _scalar_or_array(out, x)

    def recursion_maximizer(self, k: int, x: float) -> tuple[float, float]:
        """Closed-form argmax of (1 - y) f_{k+1}(x + y) over y in [0, 1 - x]."""
        k = self._check_k(k)
        if k == self.K:
            raise ValueError("the recursion is only defined for k < K")
        x = float(_check_x(x))
        y = (1.0 - x) / (self.K - k)
        return y, (1.0 - y) * self.f(k + 1, min(1.0, x + y))


def f(schedule: RegularizerSchedule, k: int, x):
    return schedule.f(k, x)


def big_f(schedule: RegularizerSchedule, k: int, x):
    return schedule.big_f(k, x)


def recursion_maximizer(schedule: RegularizerSchedule, k: int, x: float) -> tuple[float, float]:
    return schedule.recursion_maximizer(k, x)
