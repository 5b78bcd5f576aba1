"""Pure-Python/numpy reference implementation of the SA inner loop.

Euler paths are generated in vectorised blocks (innovations do not depend on
the iterate); the Robbins-Monro update itself is an ordinary Python loop. For
affine scalar models and the built-in fields this reproduces the compiled
kernel bit-for-bit: same Gaussian stream, same lattice, same operation order.
"""

from __future__ import annotations

import math

import numpy as np

from .innovation import SHARED, coupled_terminals, fine_grid_factor

OK, THETA_BOUND, NONFINITE = 0, 1, 2

_BLOCK_NUMBERS = 1 << 20


def sa_loop(gen, model, field, n, R, coupling, M, gamma0, beta, lo, hi, bound,
            theta, record_steps, record_out):
    """Run M coupled SA steps in place on ``theta`` (length R).

    Returns (status, step, level, coupled_samples, fine_increments); step and
    level are 1-based and only meaningful when status != OK.
    """
    per_step = n * fine_grid_factor(R) if coupling == SHARED else n * R * (R + 1) // 2
    rows = max(1, _BLOCK_NUMBERS // per_step)
    th = [float(t) for t in theta]
    n_rec = len(record_steps)
    k_rec = 0
    p = 0
    status = (OK, 0, 0)
    while p < M and status[0] == OK:
        size = min(rows, M - p)
        X = coupled_terminals(model, n, R, gen, coupling, size=size).tolist()
        for row in X:
            p += 1
            g = gamma0 / p ** beta
            for r in range(R):
                x = row[r]
                if not math.isfinite(x):
                    status = (NONFINITE, p, r + 1)
                    break
                t = th[r] - g * field(th[r], x)
                if t < lo:
                    t = lo
                elif t > hi:
                    t = hi
                th[r] = t
                if not abs(t) <= bound:
                    status = (THETA_BOUND, p, r + 1)
                    break
            if status[0] != OK:
                break
            if k_rec < n_rec and record_steps[k_rec] == p:
                record_out[k_rec, :] = th
                k_rec += 1
    theta[:] = th
    return status[0], status[1], status[2], p, p * per_step
