"""Multi-step Richardson-Romberg extrapolation for stochastic approximation."""

from ._backend import BACKEND
from .engine import ProjectionBox, RunRecord, bias_curve, run_crude, run_rr
from .errors import ConfigError, DivergenceError, RRSAError
from .extrapolation import (
    ExtrapolationWeights,
    compute_weights,
    independent_variance_multiplier,
    vandermonde_residual,
)
from .innovation import (
    CoupledSample,
    RngStream,
    brownian_increments,
    fine_grid_factor,
    sample_coupled,
)
from .model import (
    LinearField,
    QuantileField,
    SdeModel,
    estimate_density,
    field_H,
    gbm,
    gbm_quantile,
)
from .schedule import StepSchedule, gamma, validate

__version__ = "0.1.0"
