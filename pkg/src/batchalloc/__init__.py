"""Regularized multi-stage allocation with runtime dual certificates.

The package solves batched bipartite allocation problems (vertex-weighted
matching, b-matching, budgeted allocation and configuration allocation)
with a per-stage concave regularizer, and re-derives a dual solution from
each run to certify its competitive ratio against the LP bound.
"""

from .certify import CertReport
from .model import Alloc, McaInstance, MatchingInstance, Online, RunTrace, User, make_matching
from .regularizers import RegularizerSchedule, gamma

__version__ = "0.1.0"

__all__ = [
    "Alloc", "CertReport", "McaInstance", "MatchingInstance", "Online", "RegularizerSchedule", "RunTrace",
    "User", "gamma", "make_matching",
]
