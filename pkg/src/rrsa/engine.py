"""Robbins-Monro recursions: crude single-level SA and the coupled R-level
Richardson-Romberg estimator sum_r w_r theta^{rn}_M."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _backend
from .errors import ConfigError, DivergenceError
from .extrapolation import compute_weights
from .innovation import COUPLINGS, LATTICE_BITS, SHARED, RngStream, as_generator
from .schedule import StepSchedule


@dataclass(frozen=True)
class ProjectionBox:
    lower: float = -math.inf
    upper: float = math.inf

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ConfigError(f"projection box needs lower < upper, got [{self.lower}, {self.upper}]")


@dataclass(frozen=True)
class RunRecord:
    estimator: float
    per_level_final: tuple
    weights: tuple
    steps_used: int
    n: int
    R: int
    seed: Optional[int]
    stream_id: Optional[int]
    coupling: str
    coupled_samples: int
    simulated_fine_increments: int
    trace_steps: tuple = ()
    trace: tuple = ()
    backend: str = field(default="", compare=False)
    elapsed: float = field(default=0.0, compare=False)


@dataclass(frozen=True)
class BiasRow:
    R: int
    n: int
    residual: float
    estimator: float


def _use_kernel(model, field_, backend):
    fast = (
        model.affine is not None
        and model.dimension == 1
        and getattr(field_, "kind", None) in _backend.FIELD_KINDS
    )
    if backend == "auto":
        return fast and _backend.sa_loop_affine is not None
    if backend == "compiled":
        if _backend.sa_loop_affine is None:
            raise ConfigError("compiled kernels are not available in this installation")
        if not fast:
            raise ConfigError("compiled kernel needs an affine scalar model and a built-in field")
        return True
    if backend == "python":
        return False
    raise ConfigError(f"unknown backend {backend!r}")


def run_rr(field_, model, n: int, R: int, M: int, schedule: StepSchedule, theta0=None,
           coupling: str = SHARED, box: Optional[ProjectionBox] = None,
           rng=RngStream(0), weak_order: float = 1.0, divergence_bound: Optional[float] = None,
           record_steps: Sequence[int] = (), backend: str = "auto") -> RunRecord:
    """R coupled SA chains on step sizes T/(rn), combined with Vandermonde weights.

    Every step draws ONE coupled innovation and updates all chains with the
    same gain gamma(p).
    """
    if n < 1 or M < 1:
        raise ConfigError(f"need n >= 1 and M >= 1, got n={n}, M={M}")
    if coupling not in COUPLINGS:
        raise ConfigError(f"coupling must be one of {COUPLINGS}, got {coupling!r}")
    weights = compute_weights(R, weak_order)
    if theta0 is None:
        theta0 = model.monitored_x0
    theta = np.array(np.broadcast_to(np.asarray(theta0, dtype=float), (R,)))
    box = box or ProjectionBox()
    if divergence_bound is None:
        divergence_bound = 1e6 * max(abs(model.monitored_x0), 1.0)
    steps = np.asarray(sorted(set(int(s) for s in record_steps if 1 <= s <= M)), dtype=np.int64)
    rec = np.full((len(steps), R), np.nan)

    gen = as_generator(rng)
    use_kernel = _use_kernel(model, field_, backend)
    t0 = time.perf_counter()
    if use_kernel:
        b0, b1, s0, s1 = model.affine
        status, step, level, samples, incs = _backend.sa_loop_affine(
            gen.bit_generator, model.monitored_x0, b0, b1, s0, s1, model.horizon,
            n, R, coupling == SHARED, M, _backend.FIELD_KINDS[field_.kind], float(field_.param),
            schedule.gamma0, schedule.beta, box.lower, box.upper, divergence_bound,
            theta, steps, rec, LATTICE_BITS,
        )
    else:
        status, step, level, samples, incs = _backend.sa_loop_python(
            gen, model, field_, n, R, coupling, M, schedule.gamma0, schedule.beta,
            box.lower, box.upper, divergence_bound, theta, steps, rec,
        )
    elapsed = time.perf_counter() - t0
    if status == 1:
        raise DivergenceError(
            f"SA iterate left |theta| <= {divergence_bound:g} at step {step}, level {level}",
            step=step, level=level)
    if status == 2:
        raise DivergenceError(
            f"non-finite Euler state at step {step}, level {level} (model blow-up)",
            step=step, level=level)

    per_level = tuple(float(t) for t in theta)
    seed, stream = (rng.seed, rng.stream_id) if isinstance(rng, RngStream) else (None, None)
    return RunRecord(
        estimator=weights.combine(per_level),
        per_level_final=per_level,
        weights=weights.w,
        steps_used=int(samples),
        n=n,
        R=R,
        seed=seed,
        stream_id=stream,
        coupling=coupling,
        coupled_samples=int(samples),
        simulated_fine_increments=int(incs),
        trace_steps=tuple(int(s) for s in steps),
        trace=tuple(tuple(float(v) for v in row) for row in rec),
        backend="compiled" if use_kernel else "python",
        elapsed=elapsed,
    )


def run_crude(field_, model, n: int, M: int, schedule: StepSchedule, theta0=None,
              box: Optional[ProjectionBox] = None, rng=RngStream(0),
              divergence_bound: Optional[float] = None, record_steps: Sequence[int] = (),
              backend: str = "auto") -> RunRecord:
    """Single-level SA on the n-step Euler scheme (the R = 1 case of run_rr)."""
    if theta0 is not None and np.ndim(theta0) != 0:
        raise ConfigError("theta0 must be a scalar for the crude estimator")
    return run_rr(field_, model, n, 1, M, schedule, theta0=theta0, coupling=SHARED, box=box,
                  rng=rng, divergence_bound=divergence_bound, record_steps=record_steps,
                  backend=backend)


def bias_curve(field_, model, R_list, n_list, M: int, schedule: StepSchedule, rng,
               theta_star: float, coupling: str = SHARED, weak_order: float = 1.0,
               theta0=None, backend: str = "auto") -> list[BiasRow]:
    """Signed residual sum_r w_r theta^{rn}_M - theta* for every (R, n).

    With an RngStream every row restarts the same stream (common random numbers).
    """
    rows = []
    for R in R_list:
        for n in n_list:
            rec = run_rr(field_, model, n, R, M, schedule, theta0=theta0, coupling=coupling,
                         rng=rng, weak_order=weak_order, backend=backend)
            rows.append(BiasRow(R=R, n=n, residual=rec.estimator - theta_star,
                                estimator=rec.estimator))
    return rows
