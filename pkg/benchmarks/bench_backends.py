"""Compare the compiled SA kernel with the numpy fallback.

Runs the same (seed, configuration) on both backends, checks that the results
are identical and reports wall-clock time and ns per fine Euler increment.

    python benchmarks/bench_backends.py [--M 200000] [--repeat 3]
"""

import argparse
import time

from rrsa import QuantileField, RngStream, StepSchedule, gbm, run_rr
from rrsa import _backend
from rrsa.innovation import INDEPENDENT, SHARED

CASES = [(20, 1, SHARED), (20, 2, SHARED), (5, 3, SHARED), (5, 3, INDEPENDENT), (4, 4, SHARED)]


def best_of(repeat, fn):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--M", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    model = gbm(100.0, 0.05, 0.4)
    field = QuantileField(0.7)
    sched = StepSchedule(1 / 0.0256, 1.0, 0.0256)
    backends = _backend.available()
    print(f"backends available: {', '.join(backends)}; M = {args.M}")
    print(f"{'n':>3} {'R':>2} {'coupling':>11} {'backend':>9} {'time_s':>8} {'ns/incr':>8} "
          f"{'speedup':>8}")
    for n, R, coupling in CASES:
        ref = None
        base_t = None
        for b in ("python",) + tuple(x for x in backends if x != "python"):
            t, rec = best_of(args.repeat, lambda: run_rr(field, model, n, R, args.M, sched,
                                                         coupling=coupling, rng=RngStream(1),
                                                         backend=b))
            if ref is None:
                ref, base_t = rec, t
            elif rec != ref:
                raise SystemExit(f"backend mismatch for n={n} R={R} {coupling}")
            ns = 1e9 * t / rec.simulated_fine_increments
            print(f"{n:>3} {R:>2} {coupling:>11} {b:>9} {t:>8.3f} {ns:>8.1f} {base_t / t:>7.1f}x")
    print("all backends produced identical estimators")


if __name__ == "__main__":
    main()
