"""SDE models, the quantile field H, and analytic benchmark oracles."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError
from .innovation import RngLike, as_generator, coupled_terminals

_STD_NORMAL = NormalDist()


@dataclass(frozen=True)
class SdeModel:
    """dX = b(X) dt + sigma(X) dW on [0, horizon], started at x0.

    For d = 1 the coefficient callables take and return arrays of shape
    (batch,); for d > 1 ``drift`` maps (batch, d) -> (batch, d) and
    ``diffusion`` maps (batch, d) -> (batch, d, d).

    Scalar models with affine coefficients b(x) = b0 + b1 x and
    sigma(x) = s0 + s1 x carry them in ``affine``; only those run on the
    compiled kernel.
    """

    drift: Callable
    diffusion: Callable
    x0: object
    horizon: float = 1.0
    monitored: int = 0
    affine: Optional[tuple] = None
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ConfigError(f"horizon must be positive, got {self.horizon!r}")
        if not 0 <= self.monitored < self.dimension:
            raise ConfigError(f"monitored index {self.monitored} outside [0, {self.dimension})")
        if not np.all(np.isfinite(self.x0_vector)):
            raise ConfigError("x0 must be finite")

    @property
    def x0_vector(self) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.x0, dtype=float))

    @property
    def dimension(self) -> int:
        return int(self.x0_vector.size)

    @property
    def noise_dim(self) -> int:
        return self.dimension

    @property
    def monitored_x0(self) -> float:
        return float(self.x0_vector[self.monitored])


def affine_model(b0: float, b1: float, s0: float, s1: float, x0: float,
                 horizon: float = 1.0, name: str = "affine") -> SdeModel:
    coeffs = tuple(float(c) for c in (b0, b1, s0, s1))
    if not all(math.isfinite(c) for c in coeffs):
        raise ConfigError("affine coefficients must be finite")
    return SdeModel(
        drift=lambda x: b0 + b1 * x,
        diffusion=lambda x: s0 + s1 * x,
        x0=float(x0),
        horizon=float(horizon),
        affine=coeffs,
        name=name,
    )


def gbm(x0: float, rate: float, sigma: float, horizon: float = 1.0) -> SdeModel:
    """Black-Scholes dynamics dX = rate X dt + sigma X dW, simulated by Euler."""
    return affine_model(0.0, rate, 0.0, sigma, x0, horizon, name="gbm")


class QuantileField:
    """H(theta, x) = 1 - 1{x >= theta} / (1 - level); its root is the level-quantile."""

    kind = "quantile"

    def __init__(self, level: float):
        if not 0.0 < level < 1.0:
            raise ConfigError(f"level must lie in (0, 1), got {level!r}")
        self.level = float(level)
        self.above = 1.0 - 1.0 / (1.0 - self.level)

    @property
    def param(self) -> float:
        return self.above

    @property
    def second_moment(self) -> float:
        """E|H(theta*, X)|^2 = level / (1 - level)."""
        return self.level / (1.0 - self.level)

    def __call__(self, theta, x):
        if np.ndim(x) == 0 and np.ndim(theta) == 0:
            return 1.0 if x < theta else self.above
        return np.where(np.asarray(x) < theta, 1.0, self.above)

    def __repr__(self):
        return f"QuantileField(level={self.level})"


class LinearField:
    """H(theta, x) = theta - x; its root is E[X]."""

    kind = "linear"
    param = 0.0

    def __call__(self, theta, x):
        return theta - x

    def __repr__(self):
        return "LinearField()"


def field_H(field, theta, x):
    return field(theta, x)


def norm_ppf(p: float) -> float:
    """Standard normal quantile (Wichura AS241, ~1e-16 relative)."""
    if not 0.0 < p < 1.0:
        raise ConfigError(f"probability must lie in (0, 1), got {p!r}")
    return _STD_NORMAL.inv_cdf(p)


def gbm_quantile(x0: float, r: float, sigma: float, T: float, level: float) -> float:
    """Exact level-quantile of x0 exp((r - sigma^2/2) T + sigma W_T)."""
    if not x0 > 0:
        raise ConfigError("x0 must be positive")
    if sigma < 0 or T <= 0:
        raise ConfigError("need sigma >= 0 and T > 0")
    z = norm_ppf(level)
    return x0 * math.exp((r - 0.5 * sigma * sigma) * T + sigma * math.sqrt(T) * z)


def gbm_density(x0: float, r: float, sigma: float, T: float, x: float) -> float:
    """Lognormal density of the exact GBM marginal at time T."""
    if x <= 0:
        return 0.0
    s = sigma * math.sqrt(T)
    m = math.log(x0) + (r - 0.5 * sigma * sigma) * T
    return math.exp(-0.5 * ((math.log(x) - m) / s) ** 2) / (x * s * math.sqrt(2 * math.pi))


def gbm_cdf(x0: float, r: float, sigma: float, T: float, x: float) -> float:
    if x <= 0:
        return 0.0
    s = sigma * math.sqrt(T)
    return _STD_NORMAL.cdf((math.log(x / x0) - (r - 0.5 * sigma * sigma) * T) / s)


def euler_terminals(model: SdeModel, n: int, M: int, rng: RngLike, chunk: int = 1 << 22):
    """M independent monitored Euler terminals with n steps (chunked)."""
    gen = as_generator(rng)
    rows = max(1, chunk // n)
    out = np.empty(M)
    done = 0
    while done < M:
        k = min(rows, M - done)
        out[done:done + k] = coupled_terminals(model, n, 1, gen, size=k)[:, 0]
        done += k
    return out


def estimate_density(model: SdeModel, theta: float, n: int, M: int, eps_fd: float,
                     rng: RngLike) -> float:
    """Central finite-difference Monte Carlo density of X^n_T at ``theta``.

    (#{X <= theta + eps} - #{X <= theta - eps}) / (2 eps M)
    """
    if M < 1:
        raise ConfigError("M must be >= 1")
    if not eps_fd > 0:
        raise ConfigError("eps_fd must be positive")
    x = euler_terminals(model, n, M, rng)
    hits = np.count_nonzero(x <= theta + eps_fd) - np.count_nonzero(x <= theta - eps_fd)
    est = hits / (2.0 * eps_fd * M)
    if est == 0.0:
        warnings.warn(f"density estimate at theta={theta} is zero", RuntimeWarning, stacklevel=2)
    return est
