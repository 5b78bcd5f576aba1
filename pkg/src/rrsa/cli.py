"""Command-line entry point ``rrsa``.

Exit status: 0 on success, 2 on configuration errors, 3 when a run diverges.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace

from . import harness
from .errors import ConfigError, DivergenceError
from .extrapolation import compute_weights, independent_variance_multiplier, vandermonde_residual
from .planner import PlannerConstants, plan_crude, plan_rr

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGENCE = 0, 2, 3
DEFAULT_SWEEP = [2.0 ** -k for k in range(1, 7)]


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _emit(text, out):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _config(args, required=True):
    if args.config is None:
        if required:
            raise ConfigError("--config FILE is required for this command")
        return None
    cfg = harness.load_config(args.config)
    over = {}
    if args.seed is not None:
        over["base_seed"] = args.seed
    if args.repetitions is not None:
        over["repetitions"] = args.repetitions
    if args.out is not None:
        over["output"] = args.out
    return replace(cfg, **over) if over else cfg


def cmd_weights(args):
    wts = compute_weights(args.levels, args.weak_order)
    info = {
        "levels": wts.levels,
        "weak_order": wts.weak_order,
        "weights": list(wts.w),
        "damped_weight": wts.damped,
        "vandermonde_residual": vandermonde_residual(wts),
        "variance_multiplier": independent_variance_multiplier(args.levels, args.weak_order),
    }
    if args.json:
        _emit(json.dumps(info, indent=2), args.out)
        return
    lines = [f"w_{r} = {w!r}" for r, w in enumerate(wts.w, start=1)]
    lines += [f"damped weight = {wts.damped!r}",
              f"Vandermonde residual = {info['vandermonde_residual']:.3e}",
              f"sum w_r^2 = {info['variance_multiplier']!r}"]
    _emit("\n".join(lines), args.out)


def _plan_constants(args):
    cfg = _config(args, required=False)
    if cfg is None:
        return PlannerConstants.blind()
    return harness.planner_constants(cfg)


def cmd_plan(args):
    pc = _plan_constants(args)
    R = 1 if args.crude else args.levels

    def make(eps):
        return plan_crude(pc, eps) if R == 1 else plan_rr(pc, R, eps)

    if args.sweep:
        rows = [[repr(p.epsilon), p.R, p.n, p.M, repr(p.predicted_cost)]
                for p in map(make, args.epsilons or DEFAULT_SWEEP)]
        _emit(harness._csv_text(["epsilon", "R", "n", "M", "predicted_cost"], rows), args.out)
        return
    if args.epsilon is None:
        raise ConfigError("plan needs --epsilon (or --sweep)")
    plan = make(args.epsilon)
    if args.json:
        _emit(json.dumps(asdict(plan), indent=2), args.out)
    else:
        _emit(f"R={plan.R} n={plan.n} M={plan.M} cost={plan.predicted_cost:.6g} "
              f"(eps={plan.epsilon:g}, n*={plan.n_exact:.4f}, M*={plan.M_exact:.1f})", args.out)


def cmd_run(args):
    cfg = _config(args)
    report = harness.run_experiment(cfg, threads=args.threads)
    print(json.dumps(report.summary(), indent=2))
    if report.partial:
        raise DivergenceError(f"{len(report.failures)} of {cfg.repetitions} runs diverged")


def cmd_table(args):
    cfg = _config(args)
    eps = args.epsilons or ([cfg.epsilon] if cfg.epsilon else DEFAULT_SWEEP[:2])
    text, _ = harness.table_report(cfg, eps, args.modes, threads=args.threads,
                                   include_time=not args.no_time)
    _emit(text, args.out)


def cmd_bias_curve(args):
    cfg = _config(args)
    n_range = range(args.n_min, args.n_max + 1)
    _emit(harness.emit_bias_curve(cfg, args.levels_list, n_range, args.M), args.out)


def cmd_variance_compare(args):
    cfg = _config(args)
    cmp = harness.variance_compare(cfg, args.levels, args.n, args.M, args.seeds,
                                   threads=args.threads)
    _emit(cmp.csv(), args.out)
    if args.out:
        print(f"var_shared={cmp.var_shared!r} var_independent={cmp.var_independent!r} "
              f"sign test {cmp.sign_wins}/{args.seeds} p={cmp.sign_p_value:.3g}")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE")
    common.add_argument("--out", metavar="PATH")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--repetitions", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="rrsa", description="Richardson-Romberg extrapolation "
                                "for stochastic approximation.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("weights", parents=[common], help="print extrapolation weights")
    s.add_argument("--levels", type=int, required=True)
    s.add_argument("--weak-order", type=float, default=1.0)
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_weights)

    s = sub.add_parser("plan", parents=[common], help="optimal (n, M) for a target accuracy")
    s.add_argument("--epsilon", type=float)
    s.add_argument("--levels", type=int, default=2)
    s.add_argument("--crude", action="store_true")
    s.add_argument("--sweep", action="store_true", help="CSV over an epsilon grid")
    s.add_argument("--epsilons", type=_floats)
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_plan)

    s = sub.add_parser("run", parents=[common], help="run an experiment from a config")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("table", parents=[common], help="L1 error table over epsilons")
    s.add_argument("--epsilons", type=_floats)
    s.add_argument("--modes", type=lambda t: t.split(","), default=list(harness.MODES))
    s.add_argument("--no-time", action="store_true", help="leave time_s empty")
    s.set_defaults(func=cmd_table)

    s = sub.add_parser("bias-curve", parents=[common], help="residual versus n")
    s.add_argument("--levels-list", type=_ints, default=[2, 3, 4])
    s.add_argument("--n-min", type=int, default=2)
    s.add_argument("--n-max", type=int, default=15)
    s.add_argument("--M", type=int, default=1_000_000)
    s.set_defaults(func=cmd_bias_curve)

    s = sub.add_parser("variance-compare", parents=[common],
                       help="shared versus independent Brownian coupling")
    s.add_argument("--levels", type=int, default=3)
    s.add_argument("--n", type=int, default=5)
    s.add_argument("--M", type=int, default=100_000)
    s.add_argument("--seeds", type=int, default=20)
    s.set_defaults(func=cmd_variance_compare)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        args.func(args)
    except ConfigError as exc:
        print(f"rrsa: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"rrsa: divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
