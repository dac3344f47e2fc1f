"""Closed-form SNR thresholds for detection and localization.

All functions return the amplitude ``mu`` (in the same units as
``sigma``). Logarithms are natural. Unspecified universal constants are
exposed as keyword arguments defaulting to 1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

from .core import ParameterError


@dataclass(frozen=True)
class BoundQuery:
    n1: int
    n2: int
    k1: int
    k2: int
    m: float
    sigma: float = 1.0
    alpha: float = 0.05

    def __post_init__(self):
        vals = (self.n1, self.n2, self.k1, self.k2, self.m, self.sigma)
        if min(vals) <= 0:
            raise ParameterError("all parameters must be positive")
        if self.k1 > self.n1 or self.k2 > self.n2:
            raise ParameterError("block larger than the matrix")
        if not 0 < self.alpha <= 1:
            raise ParameterError("alpha must lie in (0, 1]")

    @property
    def delta(self) -> float:
        return self.alpha

    def with_(self, **kw) -> "BoundQuery":
        return replace(self, **kw)


class DegenerateBound(UserWarning):
    """A branch of a bound is undefined for the given dimensions."""


def log_binom(n: int, k: int) -> float:
    """``log C(n, k)`` via log-gamma."""
    if k < 0 or k > n:
        return -math.inf
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def detection_lb(q: BoundQuery) -> float:
    """Below this amplitude no test has risk under ``alpha``."""
    if q.k1 >= q.n1 or q.k2 >= q.n2:
        warnings.warn("k = n: detection lower bound degenerates", DegenerateBound, stacklevel=2)
        return math.inf
    return q.sigma * (1 - q.alpha) * math.sqrt(
        16 * (q.n1 - q.k1) * (q.n2 - q.k2) / (q.m * q.k1 ** 2 * q.k2 ** 2))


def detection_ub(q: BoundQuery) -> float:
    """Amplitude above which the all-ones sum test has risk at most ``alpha``."""
    return q.sigma * math.sqrt(8 * q.n1 * q.n2 * math.log(1 / q.alpha)
                               / (q.m * q.k1 ** 2 * q.k2 ** 2))


def passive_loc_lb(q: BoundQuery, C: float = 1.0) -> float:
    kmin = min(q.k1, q.k2)
    spread = max(q.n1 - q.k1, q.n2 - q.k2)
    second = math.log(spread) / (q.k1 * q.k2) if spread > 1 else 0.0
    return C * q.sigma * math.sqrt(q.n1 * q.n2 / q.m * max(1 / kmin, second))


def passive_loc_ub(q: BoundQuery, C2: float = 1.0) -> float:
    kmin, kmax = min(q.k1, q.k2), max(q.k1, q.k2)
    spread = max(q.n1 - q.k1, q.n2 - q.k2)
    first = math.log(kmax) / kmin
    second = math.log(spread) / (q.k1 * q.k2) if spread > 1 else 0.0
    return C2 * q.sigma * math.sqrt(q.n1 * q.n2 / q.m * math.log(2 / q.alpha)
                                    * max(first, second))


def passive_loc_min_m(q: BoundQuery, C1: float = 1.0) -> float:
    """Side condition on the sample size for :func:`passive_loc_ub`."""
    spread = max(q.n1 - q.k1, q.n2 - q.k2)
    return C1 * math.log(spread) if spread > 1 else 0.0


def active_loc_lb(q: BoundQuery) -> float:
    """Lower bound for any adaptive scheme; the approximate-localization
    branch is dropped (with a warning) when both half-dimensions are
    no larger than the block."""
    cross = max((q.n1 - q.k1) * (q.n2 / 2 - q.k2), (q.n1 / 2 - q.k1) * (q.n2 - q.k2))
    exact = math.sqrt(8 / (q.m * min(q.k1, q.k2)))
    if cross > 0:
        approx = math.sqrt(2 * cross / (q.m * q.k1 ** 2 * q.k2 ** 2))
    else:
        warnings.warn("approximate-localization branch undefined; dropped",
                      DegenerateBound, stacklevel=2)
        approx = 0.0
    return q.sigma * (1 - q.alpha) * max(approx, exact)


def active_loc_ub(q: BoundQuery) -> float:
    """Explicit-constant sufficient amplitude for the adaptive procedure at
    overall failure level ``delta`` (``q.alpha``)."""
    d = q.alpha
    approx = math.sqrt(352 * q.sigma ** 2 * q.n1 * q.n2 * math.log(4 / d + 1)
                       / (q.m * q.k1 ** 2 * q.k2 ** 2))
    kmax, kmin = max(q.k1, q.k2), min(q.k1, q.k2)
    if kmax < 2:
        return approx
    lk = math.log(kmax)
    exact = math.sqrt(1408 * q.sigma ** 2 * lk * math.log(24 * lk / d) / (q.m * kmin))
    return max(approx, exact)


def bicluster_passive_ub(q: BoundQuery, C: float = 1.0) -> float:
    """Sufficient amplitude for exhaustive search over non-contiguous biclusters."""
    spread = (q.n1 - q.k1) * (q.n2 - q.k2)
    term = math.log(spread) / (q.k1 + q.k2) if spread > 1 else 0.0
    return C * q.sigma * math.sqrt(q.n1 * q.n2 / q.m * math.log(2 / q.alpha) * term)


def bicluster_passive_lb(q: BoundQuery, C: float = 1.0) -> float:
    def safe_log(v):
        return math.log(v) if v > 1 else 0.0

    comb = log_binom(q.n1 - q.k1, q.k1) + log_binom(q.n2 - q.k2, q.k2)
    terms = (safe_log(q.n1 - q.k1) / q.k2, safe_log(q.n2 - q.k2) / q.k1,
             max(comb, 0.0) / (q.k1 * q.k2))
    return C * q.sigma * math.sqrt(q.n1 * q.n2 / q.m * max(terms))


BOUNDS = {
    "det-lb": detection_lb,
    "det-ub": detection_ub,
    "ploc-lb": passive_loc_lb,
    "ploc-ub": passive_loc_ub,
    "aloc-lb": active_loc_lb,
    "aloc-ub": active_loc_ub,
    "bic-ub": bicluster_passive_ub,
    "bic-lb": bicluster_passive_lb,
}

# bounds that accept an unspecified universal constant
CONSTANT_KW = {"ploc-lb": "C", "ploc-ub": "C2", "bic-ub": "C", "bic-lb": "C"}


def evaluate(which: str, q: BoundQuery, C: float = 1.0) -> float:
    try:
        fn = BOUNDS[which]
    except KeyError:
        raise ParameterError(f"unknown bound {which!r}; choose from {sorted(BOUNDS)}") from None
    if which in CONSTANT_KW:
        return fn(q, **{CONSTANT_KW[which]: C})
    return fn(q)
