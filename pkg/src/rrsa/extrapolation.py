"""Richardson-Romberg weights for an R-level bias expansion in powers of n^-alpha.

The weights w_1..w_R solve the scalar Vandermonde system

    sum_r w_r = 1,    sum_r w_r / r^(alpha p) = 0   (p = 1..R-1)

and the surviving n^(-alpha R) bias term is multiplied by the damped weight
(-1)^(R-1) / (R!)^alpha.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

MAX_LEVELS = 8


@dataclass(frozen=True)
class ExtrapolationWeights:
    levels: int
    weak_order: float
    w: tuple[float, ...]
    damped: float

    def combine(self, values) -> float:
        """Return sum_r w_r * values[r] (left to right)."""
        if len(values) != self.levels:
            raise ValueError(f"expected {self.levels} values, got {len(values)}")
        total = 0.0
        for wr, v in zip(self.w, values):
            total += wr * float(v)
        return total


def _check(levels, weak_order):
    if isinstance(levels, bool) or int(levels) != levels or levels < 1:
        raise ConfigError(f"levels must be a positive integer, got {levels!r}")
    if levels > MAX_LEVELS:
        raise ConfigError(f"levels capped at {MAX_LEVELS}, got {levels}")
    if not (math.isfinite(weak_order) and weak_order > 0):
        raise ConfigError(f"weak_order must be finite and positive, got {weak_order!r}")


def _gap(hi: int, lo: int, alpha: float) -> float:
    # hi^alpha - lo^alpha, hi > lo >= 0; exact for integer alpha
    if lo == 0:
        return math.pow(hi, alpha)
    if alpha.is_integer():
        return math.pow(hi, alpha) - math.pow(lo, alpha)
    return math.pow(hi, alpha) * -math.expm1(alpha * math.log(lo / hi))


def _log_gap(hi: int, lo: int, alpha: float) -> float:
    if lo == 0:
        return alpha * math.log(hi)
    return alpha * math.log(hi) + math.log(-math.expm1(alpha * math.log(lo / hi)))


# beyond this log-magnitude the direct products may overflow a double
_LOG_OVERFLOW = 600.0


def _weight(r: int, R: int, a: float) -> float:
    sign = -1.0 if (R - r) % 2 else 1.0
    if a * R * math.log(R) < _LOG_OVERFLOW:
        den = 1.0
        for j in range(r):
            den *= _gap(r, j, a)
        for j in range(r + 1, R + 1):
            den *= _gap(j, r, a)
        if math.isfinite(den) and den > 0.0:
            return sign * (math.pow(r, a * R) / den)
    log_mag = a * R * math.log(r)
    for j in range(r):
        log_mag -= _log_gap(r, j, a)
    for j in range(r + 1, R + 1):
        log_mag -= _log_gap(j, r, a)
    return sign * math.exp(log_mag)


def compute_weights(levels: int, weak_order: float = 1.0) -> ExtrapolationWeights:
    """Closed-form Vandermonde weights for ``levels`` refinements n, 2n, ..., Rn.

    The products are evaluated directly (exact for integer ``weak_order``) and
    switch to a log-magnitude/sign form when they could overflow.

    >>> compute_weights(2, 1.0).w
    (-1.0, 2.0)
    """
    _check(levels, weak_order)
    R, a = int(levels), float(weak_order)
    w = tuple(_weight(r, R, a) for r in range(1, R + 1))
    sign = -1.0 if (R - 1) % 2 else 1.0
    try:
        damped = sign / math.pow(math.factorial(R), a)
    except OverflowError:
        damped = sign * math.exp(-a * math.lgamma(R + 1))
    return ExtrapolationWeights(levels=R, weak_order=a, w=w, damped=damped)


def vandermonde_matrix(levels: int, weak_order: float) -> np.ndarray:
    """Matrix with entries 1 / r^((p-1) alpha), rows p = 1..R, columns r = 1..R."""
    r = np.arange(1, levels + 1, dtype=float)
    p = np.arange(levels, dtype=float)[:, None]
    return r[None, :] ** (-weak_order * p)


def vandermonde_residual(weights: ExtrapolationWeights) -> float:
    """Max-norm of V w - e_1, an independent check on the closed form."""
    V = vandermonde_matrix(weights.levels, weights.weak_order)
    rhs = np.zeros(weights.levels)
    rhs[0] = 1.0
    return float(np.max(np.abs(V @ np.asarray(weights.w) - rhs)))


def independent_variance_multiplier(levels: int, weak_order: float = 1.0) -> float:
    """sum_r w_r^2: variance inflation when the R levels use independent noise."""
    w = compute_weights(levels, weak_order).w
    return math.fsum(x * x for x in w)
