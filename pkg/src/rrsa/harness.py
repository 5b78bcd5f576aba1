"""Experiment orchestration: JSON configs, seed-parallel repetitions, CSV output.

Repetition i of an experiment uses ``RngStream(base_seed, i)``; results are
reduced in index order so reports do not depend on the worker count.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .engine import ProjectionBox, bias_curve, run_rr
from .errors import ConfigError, DivergenceError
from .innovation import COUPLINGS, SHARED, RngStream
from .model import QuantileField, estimate_density, gbm, gbm_quantile
from .planner import BudgetPlan, PlannerConstants, cost, dh_from_density, plan_crude, plan_rr
from .schedule import StepSchedule

log = logging.getLogger(__name__)

MODES = ("crude", "rr")
TABLE_HEADER = ["epsilon", "l1_error", "time_s", "R", "n", "M"]
RUN_HEADER = ["run", "seed", "stream_id", "mode", "R", "n", "M", "coupling", "estimator",
              "abs_error", "fine_increments"]
# stream reserved for the finite-difference density pilot
DENSITY_STREAM = (1 << 64) - 1
# Dh recipe: central differences with n = 100 Euler steps, 1000 samples, eps = 0.1
DENSITY_RECIPE = dict(n=100, M=1000, eps_fd=0.1)


@dataclass(frozen=True)
class ModelConfig:
    model: str = "gbm"
    x0: float = 100.0
    rate: float = 0.05
    sigma: float = 0.4
    horizon: float = 1.0
    level: float = 0.7
    dh_override: Optional[float] = None


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelConfig = ModelConfig()
    gamma0: Optional[float] = None
    beta: float = 1.0
    lambda_lower: Optional[float] = None
    mode: str = "rr"
    R: int = 2
    epsilon: Optional[float] = None
    n: Optional[int] = None
    M: Optional[int] = None
    repetitions: int = 50
    base_seed: int = 0
    coupling: str = SHARED
    output: Optional[str] = None
    K: float = 1.0
    weak_order: float = 1.0
    c_tilde: float = 1.0
    theta0: Optional[float] = None
    box: Optional[tuple] = None
    reference: Optional[float] = None
    levels_by_epsilon: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.coupling not in COUPLINGS:
            raise ConfigError(f"coupling must be one of {COUPLINGS}, got {self.coupling!r}")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        explicit = self.n is not None or self.M is not None
        if (self.epsilon is None) == (not explicit):
            if self.epsilon is None:
                raise ConfigError("provide either epsilon or both n and M")
            raise ConfigError("provide exactly one of epsilon or explicit (n, M)")
        if explicit and (self.n is None or self.M is None):
            raise ConfigError("explicit budgets need both n and M")
        if self.model.model != "gbm":
            raise ConfigError(f"unknown model {self.model.model!r} (only 'gbm' is built in)")

    @property
    def levels(self) -> int:
        return 1 if self.mode == "crude" else self.R


_MODEL_KEYS = {f for f in ModelConfig.__dataclass_fields__}
_TOP_KEYS = {f for f in ExperimentConfig.__dataclass_fields__} - {"model"}


def config_from_dict(d: dict) -> ExperimentConfig:
    """Build a config from a parsed JSON document.

    The model block may be nested (``"model": {"model": "gbm", "x0": ...}``)
    or flat (``"model": "gbm"`` with model keys at top level); the step
    schedule may sit in a ``"schedule"`` block or at top level.
    """
    d = dict(d)
    m = d.pop("model", {})
    if isinstance(m, str):
        m = {"model": m}
        for k in list(d):
            if k in _MODEL_KEYS:
                m[k] = d.pop(k)
    sched = d.pop("schedule", {})
    for k, v in sched.items():
        d.setdefault(k, v)
    unknown = (set(m) - _MODEL_KEYS) | (set(d) - _TOP_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "box" in d and d["box"] is not None:
        d["box"] = tuple(float(v) for v in d["box"])
    if "levels_by_epsilon" in d:
        d["levels_by_epsilon"] = {float(k): int(v) for k, v in d["levels_by_epsilon"].items()}
    try:
        return ExperimentConfig(model=ModelConfig(**m), **d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            return config_from_dict(json.load(fh))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def resolve_threads(threads: Optional[int] = None) -> int:
    if threads is None:
        env = os.environ.get("RRSA_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    return threads


# -- resolved pieces ---------------------------------------------------------

def build_model(cfg: ExperimentConfig):
    mc = cfg.model
    return gbm(mc.x0, mc.rate, mc.sigma, mc.horizon)


def reference_value(cfg: ExperimentConfig) -> float:
    if cfg.reference is not None:
        return float(cfg.reference)
    mc = cfg.model
    return gbm_quantile(mc.x0, mc.rate, mc.sigma, mc.horizon, mc.level)


def estimate_dh(cfg: ExperimentConfig) -> float:
    """Dh(theta*): the override if given, else the finite-difference recipe."""
    if cfg.model.dh_override is not None:
        return float(cfg.model.dh_override)
    density = estimate_density(build_model(cfg), reference_value(cfg),
                               rng=RngStream(cfg.base_seed, DENSITY_STREAM), **DENSITY_RECIPE)
    if density <= 0:
        raise ConfigError("density pilot returned 0; set model.dh_override")
    return dh_from_density(density, cfg.model.level)


def planner_constants(cfg: ExperimentConfig, dh: Optional[float] = None) -> PlannerConstants:
    dh = estimate_dh(cfg) if dh is None else dh
    lam = cfg.lambda_lower if cfg.lambda_lower is not None else dh
    g0 = cfg.gamma0 if cfg.gamma0 is not None else 1.0 / lam
    return PlannerConstants(dh=dh, level=cfg.model.level, gamma0=g0, lambda_lower=lam,
                            weak_order=cfg.weak_order, beta=cfg.beta, c_tilde=cfg.c_tilde,
                            K=cfg.K)


def build_schedule(cfg: ExperimentConfig, dh: Optional[float] = None) -> StepSchedule:
    if cfg.gamma0 is not None:
        return StepSchedule(cfg.gamma0, cfg.beta, cfg.lambda_lower)
    pc = planner_constants(cfg, dh)
    return StepSchedule(pc.gamma0, cfg.beta, pc.lambda_lower)


def resolve_plan(cfg: ExperimentConfig, dh: Optional[float] = None) -> BudgetPlan:
    if cfg.epsilon is None:
        plan = BudgetPlan(n=cfg.n, M=cfg.M, R=cfg.levels, predicted_cost=0.0,
                          epsilon=math.nan, K=cfg.K)
        return replace(plan, predicted_cost=cost(plan))
    pc = planner_constants(cfg, dh)
    if cfg.mode == "crude":
        return plan_crude(pc, cfg.epsilon)
    return plan_rr(pc, cfg.levels, cfg.epsilon)


# -- experiments -------------------------------------------------------------

@dataclass(frozen=True)
class RunFailure:
    run: int
    message: str


@dataclass(frozen=True)
class ExperimentReport:
    estimators: tuple
    reference: float
    l1_error: float
    l1_stderr: float
    mean_elapsed: float
    total_fine_increments: int
    plan: BudgetPlan
    repetitions: int
    failures: tuple = ()
    runs: tuple = ()

    @property
    def partial(self) -> bool:
        return bool(self.failures)

    def summary(self) -> dict:
        return {
            "repetitions": self.repetitions,
            "completed": len(self.estimators),
            "partial": self.partial,
            "reference": self.reference,
            "l1_error": self.l1_error,
            "l1_stderr": self.l1_stderr,
            "mean_elapsed_s": self.mean_elapsed,
            "total_fine_increments": self.total_fine_increments,
            "plan": {"R": self.plan.R, "n": self.plan.n, "M": self.plan.M,
                     "epsilon": None if math.isnan(self.plan.epsilon) else self.plan.epsilon, "predicted_cost": self.plan.predicted_cost},
            "failures": [f.__dict__ for f in self.failures],
        }


def _one_run(cfg, model, field_, schedule, plan, i):
    rng = RngStream(cfg.base_seed, i)
    box = ProjectionBox(*cfg.box) if cfg.box else None
    try:
        return run_rr(field_, model, plan.n, plan.R, plan.M, schedule, theta0=cfg.theta0,
                      coupling=cfg.coupling, box=box, rng=rng, weak_order=cfg.weak_order)
    except DivergenceError as exc:
        return RunFailure(i, str(exc))


def run_experiment(cfg: ExperimentConfig, threads: Optional[int] = None,
                   write: bool = True) -> ExperimentReport:
    """Execute ``cfg.repetitions`` independent runs and aggregate the L1 error."""
    dh = estimate_dh(cfg) if (cfg.epsilon is not None or cfg.gamma0 is None) else None
    plan = resolve_plan(cfg, dh)
    schedule = build_schedule(cfg, dh)
    model = build_model(cfg)
    field_ = QuantileField(cfg.model.level)
    theta_star = reference_value(cfg)
    log.info("plan R=%d n=%d M=%d, %d repetitions", plan.R, plan.n, plan.M, cfg.repetitions)

    workers = min(resolve_threads(threads), cfg.repetitions)
    idx = range(cfg.repetitions)
    if workers == 1:
        results = [_one_run(cfg, model, field_, schedule, plan, i) for i in idx]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda i: _one_run(cfg, model, field_, schedule, plan, i), idx))

    runs = tuple(r for r in results if not isinstance(r, RunFailure))
    failures = tuple(r for r in results if isinstance(r, RunFailure))
    est = np.array([r.estimator for r in runs])
    err = np.abs(est - theta_star)
    report = ExperimentReport(
        estimators=tuple(float(e) for e in est),
        reference=theta_star,
        l1_error=float(err.mean()) if len(err) else math.nan,
        l1_stderr=float(err.std(ddof=1) / math.sqrt(len(err))) if len(err) > 1 else math.nan,
        mean_elapsed=float(np.mean([r.elapsed for r in runs])) if runs else math.nan,
        total_fine_increments=sum(r.simulated_fine_increments for r in runs),
        plan=plan,
        repetitions=cfg.repetitions,
        failures=failures,
        runs=runs,
    )
    if write and cfg.output:
        with open(cfg.output, "w", newline="") as fh:
            fh.write(runs_csv(cfg, report))
    return report


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def runs_csv(cfg: ExperimentConfig, report: ExperimentReport) -> str:
    """Per-run CSV; contains no timing so reruns are byte-identical."""
    rows = []
    for r in report.runs:
        rows.append([r.stream_id, r.seed, r.stream_id, cfg.mode, r.R, r.n, r.steps_used,
                     r.coupling, repr(r.estimator), repr(abs(r.estimator - report.reference)),
                     r.simulated_fine_increments])
    return _csv_text(RUN_HEADER, rows)


def table_report(cfg_base: ExperimentConfig, epsilons, modes=MODES, threads=None,
                 include_time: bool = True) -> tuple[str, list]:
    """One row per (mode, epsilon) in the layout epsilon,l1_error,time_s,R,n,M.

    RR rows take R from ``levels_by_epsilon`` when present, else ``cfg_base.R``.
    ``time_s`` (mean wall-clock per run) is machine dependent; with
    ``include_time=False`` the column is left empty.
    """
    rows = []
    for mode in modes:
        for eps in epsilons:
            R = cfg_base.levels_by_epsilon.get(float(eps), cfg_base.R) if mode == "rr" else 1
            cfg = replace(cfg_base, mode=mode, R=R, epsilon=float(eps), n=None, M=None,
                          output=None)
            rep = run_experiment(cfg, threads=threads, write=False)
            t = repr(rep.mean_elapsed) if include_time else ""
            rows.append([repr(float(eps)), repr(rep.l1_error), t, rep.plan.R, rep.plan.n,
                         rep.plan.M])
    return _csv_text(TABLE_HEADER, rows), rows


def emit_bias_curve(cfg: ExperimentConfig, R_list, n_range, M: int) -> str:
    """CSV ``R,n,residual`` of sum_r w_r theta^{rn}_M - theta* over the grid."""
    model = build_model(cfg)
    schedule = build_schedule(cfg)
    rows = bias_curve(QuantileField(cfg.model.level), model, R_list, list(n_range), M, schedule,
                      RngStream(cfg.base_seed, 0), reference_value(cfg), coupling=cfg.coupling,
                      weak_order=cfg.weak_order, theta0=cfg.theta0)
    return _csv_text(["R", "n", "residual"], [[b.R, b.n, repr(b.residual)] for b in rows])


@dataclass(frozen=True)
class VarianceComparison:
    var_shared: float
    var_independent: float
    shared: tuple
    independent: tuple
    sign_wins: int
    sign_p_value: float

    def csv(self) -> str:
        rows = [["estimator", "shared", i, repr(v)] for i, v in enumerate(self.shared)]
        rows += [["estimator", "independent", i, repr(v)] for i, v in enumerate(self.independent)]
        rows += [["variance", "shared", "", repr(self.var_shared)],
                 ["variance", "independent", "", repr(self.var_independent)],
                 ["sign_test_p", "independent>shared", self.sign_wins, repr(self.sign_p_value)]]
        return _csv_text(["kind", "coupling", "run", "value"], rows)


def sign_test_p(wins: int, trials: int) -> float:
    """One-sided P(Binomial(trials, 1/2) >= wins)."""
    return sum(math.comb(trials, k) for k in range(wins, trials + 1)) / 2.0 ** trials


def variance_compare(cfg: ExperimentConfig, R: int, n: int, M: int, seeds: int,
                     threads=None) -> VarianceComparison:
    """Run the R-level estimator under both couplings on the same seeds.

    The sign test counts seeds where the independent-noise estimator lies
    farther from the shared-noise sample mean than the shared one does.
    """
    out = {}
    for coupling in COUPLINGS:
        c = replace(cfg, mode="rr", R=R, n=n, M=M, epsilon=None, coupling=coupling,
                    repetitions=seeds, output=None)
        rep = run_experiment(c, threads=threads, write=False)
        if rep.partial:
            raise DivergenceError(f"{len(rep.failures)} runs diverged under {coupling} coupling")
        out[coupling] = np.array(rep.estimators)
    sh, ind = out["shared"], out["independent"]
    center = sh.mean()
    wins = int(np.count_nonzero(np.abs(ind - center) > np.abs(sh - center)))
    return VarianceComparison(
        var_shared=float(sh.var(ddof=1)) if seeds > 1 else 0.0,
        var_independent=float(ind.var(ddof=1)) if seeds > 1 else 0.0,
        shared=tuple(float(v) for v in sh),
        independent=tuple(float(v) for v in ind),
        sign_wins=wins,
        sign_p_value=sign_test_p(wins, seeds),
    )
