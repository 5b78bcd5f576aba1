"""Gain sequence gamma(p) = gamma0 / p**beta for the Robbins-Monro recursion."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .errors import ConfigError


@dataclass(frozen=True)
class StepSchedule:
    """Polynomial step sequence.

    ``lambda_lower`` is the experimenter's guess of the attractivity constant
    (smallest eigenvalue of the symmetrised Jacobian of the mean field). It is
    usually unknown, so it is optional.
    """

    gamma0: float
    beta: float = 1.0
    lambda_lower: Optional[float] = None

    def __post_init__(self):
        if not (math.isfinite(self.gamma0) and self.gamma0 > 0):
            raise ConfigError(f"gamma0 must be positive, got {self.gamma0!r}")
        if not (0.5 < self.beta <= 1.0):
            raise ConfigError(f"beta must lie in (1/2, 1], got {self.beta!r}")
        if self.lambda_lower is not None and not (self.lambda_lower > 0):
            raise ConfigError(f"lambda_lower must be positive, got {self.lambda_lower!r}")

    def __call__(self, p: int) -> float:
        return gamma(self, p)


def gamma(schedule: StepSchedule, p: int) -> float:
    """Step size used for update number ``p`` (p >= 1)."""
    if p < 1:
        raise ConfigError(f"step index must be >= 1, got {p}")
    return schedule.gamma0 / p ** schedule.beta


def validate(schedule: StepSchedule) -> list[str]:
    """Return soft warnings about a schedule; hard errors are raised on construction."""
    if not isinstance(schedule, StepSchedule):
        raise ConfigError("expected a StepSchedule")
    warnings = []
    if schedule.beta < 1.0:
        warnings.append(
            f"beta = {schedule.beta} < 1: asymptotic complexity is suboptimal (beta = 1 is optimal)"
        )
    if schedule.lambda_lower is None:
        if schedule.beta == 1.0:
            warnings.append("note: lambda_lower unknown, 2*lambda_lower*gamma0 > 1 not checked")
    elif schedule.beta == 1.0 and 2.0 * schedule.lambda_lower * schedule.gamma0 <= 1.0:
        warnings.append(
            "2λ̲γ₀ ≤ 1: 2*lambda_lower*gamma0 = "
            f"{2.0 * schedule.lambda_lower * schedule.gamma0:.4g}, the L2 rate gamma(p) is not guaranteed"
        )
    return warnings
