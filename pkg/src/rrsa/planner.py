"""Cost model and asymptotically optimal (n, M) budgets.

Error model for the R-level estimator at accuracy eps:

    mu_R n^(-alpha R) + nu_R gamma(M)^(1/2) <= eps,   cost = K M n R(R+1)/2

with mu_R = |C_R| / (R!)^alpha and nu_R = C(gamma, lambda) E|H(theta*, U)|^2 ^(1/2).
The crude estimator is the R = 1 case. Unmodelled o(1) factors of the
asymptotic expansion are taken as zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

from .errors import ConfigError

# Blind constants used for the GBM quantile benchmark: Dh(theta*) estimated
# by finite differences, lambda_lower = Dh, gamma0 = 1 / lambda_lower, |C~_R| = 1.
BENCHMARK_DH = 2.56e-2
BENCHMARK_LEVEL = 0.7


@dataclass(frozen=True)
class PlannerConstants:
    """Structural constants feeding the budget formulas.

    ``c_tilde`` is |C~_R| (so |C_R| = c_tilde / dh), ``dh`` the derivative of
    the mean field at the root, ``level`` the quantile level and ``K`` the cost
    of one fine Euler step. ``step_constant`` overrides C(gamma, lambda), which
    only has a closed form gamma0 / sqrt(2 lambda gamma0 - 1) when beta = 1.
    """

    dh: float
    level: float
    gamma0: float
    lambda_lower: float
    weak_order: float = 1.0
    beta: float = 1.0
    c_tilde: float = 1.0
    K: float = 1.0
    step_constant: Optional[float] = None

    def __post_init__(self):
        for name in ("dh", "gamma0", "lambda_lower", "weak_order", "c_tilde", "K"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be positive, got {v!r}")
        if not 0.5 < self.beta <= 1.0:
            raise ConfigError(f"beta must lie in (1/2, 1], got {self.beta!r}")
        if not 0.0 < self.level < 1.0:
            raise ConfigError(f"level must lie in (0, 1), got {self.level!r}")

    @classmethod
    def blind(cls, dh: float = BENCHMARK_DH, level: float = BENCHMARK_LEVEL, **kw):
        """lambda_lower = dh and gamma0 = 1/dh, the minimiser of C(gamma, lambda)."""
        return cls(dh=dh, level=level, gamma0=1.0 / dh, lambda_lower=dh, **kw)


@dataclass(frozen=True)
class BudgetPlan:
    n: int
    M: int
    R: int
    predicted_cost: float
    epsilon: float
    n_exact: float = math.nan
    M_exact: float = math.nan
    K: float = 1.0

    def __post_init__(self):
        if self.n < 1 or self.M < 1:
            raise ConfigError(f"plan needs n >= 1 and M >= 1, got n={self.n}, M={self.M}")


def dh_from_density(density: float, level: float) -> float:
    """Dh(theta*) = p(theta*) / (1 - level) for the quantile field."""
    return density / (1.0 - level)


def step_constant(pc: PlannerConstants) -> float:
    if pc.step_constant is not None:
        return pc.step_constant
    if pc.beta != 1.0:
        raise ConfigError("C(gamma, lambda) has no closed form for beta < 1; set step_constant")
    k = 2.0 * pc.lambda_lower * pc.gamma0 - 1.0
    if k <= 0:
        raise ConfigError(f"2*lambda_lower*gamma0 = {k + 1:.4g} <= 1: step constant undefined")
    return pc.gamma0 / math.sqrt(k)


def derive_constants(pc: PlannerConstants, R: int) -> tuple[float, float]:
    """(mu_R, nu_R) for shared-noise coupling, where E|sum w_r H|^2 = E|H|^2."""
    if R < 1:
        raise ConfigError(f"R must be >= 1, got {R}")
    mu = (pc.c_tilde / pc.dh) / math.pow(math.factorial(R), pc.weak_order)
    nu = step_constant(pc) * math.sqrt(pc.level / (1.0 - pc.level))
    return mu, nu


def cost(plan: BudgetPlan) -> float:
    """K M n R(R+1)/2: fine Euler steps spent by the R-level estimator."""
    return plan.K * plan.M * plan.n * plan.R * (plan.R + 1) / 2


def plan_rr(pc: PlannerConstants, R: int, epsilon: float) -> BudgetPlan:
    if not (math.isfinite(epsilon) and epsilon > 0):
        raise ConfigError(f"epsilon must be positive, got {epsilon!r}")
    mu, nu = derive_constants(pc, R)
    a, b = pc.weak_order, pc.beta
    aR = a * R
    n_exact = (2.0 * aR / b + 1.0) ** (1.0 / aR) * mu ** (1.0 / aR) * epsilon ** (-1.0 / aR)
    M_exact = (pc.gamma0 ** (1.0 / b) * nu ** (2.0 / b) * (1.0 + b / (2.0 * aR)) ** (2.0 / b)
               * epsilon ** (-2.0 / b))
    n, M = max(1, math.ceil(n_exact)), max(1, math.ceil(M_exact))
    plan = BudgetPlan(n=n, M=M, R=R, predicted_cost=0.0, epsilon=epsilon,
                      n_exact=n_exact, M_exact=M_exact, K=pc.K)
    return replace(plan, predicted_cost=cost(plan))


def plan_crude(pc: PlannerConstants, epsilon: float) -> BudgetPlan:
    """Single-level budget; identical to plan_rr with R = 1."""
    return plan_rr(pc, 1, epsilon)


def compare_costs(pc: PlannerConstants, epsilon: float, R_list) -> list[BudgetPlan]:
    """Plans for each R (R = 1 is the crude estimator), cheapest first."""
    plans = [plan_crude(pc, epsilon) if R == 1 else plan_rr(pc, R, epsilon) for R in R_list]
    return sorted(plans, key=lambda p: (p.predicted_cost, p.R))
