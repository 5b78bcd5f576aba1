"""Independent reference computations used by the test-suite.

Nothing here imports the package under test.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.signal import fftconvolve
from scipy.stats import lognorm, norm

GBM = dict(x0=100.0, rate=0.05, sigma=0.4, horizon=1.0, level=0.7)

# Budgets printed for the quantile benchmark (R-level and crude estimators).
TABLE_RR = {(0.5, 2): (14, 8.69e5), (0.25, 2): (20, 3.48e6),
            (0.125, 3): (8, 1.21e7), (0.0625, 3): (10, 4.85e7)}
TABLE_CRUDE = {0.5: (235, 1.25e6), 0.25: (469, 5.01e6), 0.125: (938, 2.00e7),
               0.0625: (1876, 8.01e7)}


def gbm_quantile_scipy(x0, rate, sigma, horizon, level):
    """Quantile of the exact lognormal terminal law."""
    scale = x0 * math.exp((rate - 0.5 * sigma ** 2) * horizon)
    return float(lognorm.ppf(level, sigma * math.sqrt(horizon), scale=scale))


def lagrange_weights(R: int, alpha: int) -> list[Fraction]:
    """Exact weights for integer alpha: Lagrange basis at 0 through nodes r^-alpha."""
    x = [Fraction(1, r ** alpha) for r in range(1, R + 1)]
    out = []
    for i in range(R):
        w = Fraction(1)
        for j in range(R):
            if j != i:
                w *= (0 - x[j]) / (x[i] - x[j])
        out.append(w)
    return out


def solve_weights(R: int, alpha: float) -> np.ndarray:
    """Dense solve of sum_r w_r r^(-alpha k) = [k == 0], k = 0..R-1."""
    r = np.arange(1, R + 1, dtype=float)
    V = np.array([r ** (-alpha * k) for k in range(R)])
    e = np.zeros(R)
    e[0] = 1.0
    return np.linalg.solve(V, e)


@lru_cache(maxsize=None)
def euler_quantile(n: int, x0=100.0, rate=0.05, sigma=0.4, horizon=1.0, level=0.7,
                   h=2e-4, ylo=-12.0, yhi=3.0) -> float:
    """Exact level-quantile of the n-step Euler scheme for GBM.

    X_n = x0 * prod_k (1 + a + b Z_k) with a = r T/n and b = sigma sqrt(T/n).
    The law of log|factor| is discretised on a uniform grid and convolved n
    times by FFT, tracking the sign of the product separately. Accurate to
    about 1e-5 at the default grid.
    """
    a = rate * horizon / n
    b = sigma * math.sqrt(horizon / n)
    edges = np.arange(ylo, yhi + h, h)
    ue = np.exp(edges)
    zp = (ue - 1 - a) / b
    pos = np.diff(norm.cdf(zp))
    zn = (-ue - 1 - a) / b
    neg = -np.diff(norm.cdf(zn))
    z0 = (0 - 1 - a) / b
    # factors with |u| below the grid go to the first cell
    pos[0] += norm.cdf(zp[0]) - norm.cdf(z0)
    neg[0] += norm.cdf(z0) - norm.cdf(zn[0])
    P, N = pos.copy(), neg.copy()
    for _ in range(n - 1):
        P, N = (fftconvolve(P, pos) + fftconvolve(N, neg),
                fftconvolve(P, neg) + fftconvolve(N, pos))
        P = np.maximum(P, 0.0)
        N = np.maximum(N, 0.0)
    upper = n * ylo + (np.arange(len(P)) + 0.5 * n) * h + 0.5 * h
    cdf_pos = np.cumsum(P)
    neg_mass = N.sum()

    def F(theta):
        return neg_mass + np.interp(math.log(theta / x0), upper, cdf_pos)

    return brentq(lambda t: F(t) - level, 0.5 * x0, 3.0 * x0, xtol=1e-10)


def rr_target(n: int, R: int, **kw) -> float:
    """sum_r w_r theta^{*, r n} with exact alpha = 1 weights."""
    w = lagrange_weights(R, 1)
    return sum(float(wr) * euler_quantile(r * n, **kw) for r, wr in zip(range(1, R + 1), w))
