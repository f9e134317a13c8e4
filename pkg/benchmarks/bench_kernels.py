"""Compare the numba kernels against their numpy twins.

    python benchmarks/bench_kernels.py --n 20000 --repeat 3

Each case is run once per backend to warm up (JIT compilation, caches)
and then timed ``--repeat`` times; the best wall time is reported along
with the mean ratio, which should agree between backends up to Monte
Carlo error.  Setting ``SNLEVY_DISABLE_NUMBA=1`` only changes the
``auto`` default, so both backends stay measurable here unless numba is
missing.
"""

import argparse
import json
import time

from snlevy import weights as W
from snlevy._accel import HAVE_NUMBA
from snlevy.levy_measure import ExpCompoundPoisson, LogSlowlyVarying, StablePositive
from snlevy.simulate import SeriesConfig, ShellConfig, ratio_batch

CASES = [
    ("series stable(0.5) two_point", "series", StablePositive(0.5), W.two_point(), 1.0),
    ("series log_sv gaussian", "series", LogSlowlyVarying(), W.gaussian(), 1e-2),
    ("layered stable(0.5) two_point", "layered", StablePositive(0.5), W.two_point(), 1.0),
    ("layered exp_cp uniform", "layered", ExpCompoundPoisson(), W.uniform(), 2.0),
]


def _time(engine, m, f, t, n, backend, repeat, tol):
    cfg = SeriesConfig(tol=tol) if engine == "series" else ShellConfig(tol=tol)
    run = lambda: ratio_batch(t, m, f, n, engine=engine, cfg=cfg, seed=1, backend=backend, jobs=1)  # noqa: E731
    run()
    best, batch = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        batch = run()
        best = min(best, time.perf_counter() - t0)
    return best, float(batch.ratios.mean())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--tol", type=float, default=1e-4)
    ap.add_argument("--json", help="also write results to this file")
    args = ap.parse_args(argv)

    backends = ["numba", "numpy"] if HAVE_NUMBA else ["numpy"]
    rows = []
    print(f"{'case':32s} {'backend':8s} {'seconds':>9s} {'mean T':>9s}")
    for name, engine, m, f, t in CASES:
        times = {}
        for be in backends:
            secs, mean = _time(engine, m, f, t, args.n, be, args.repeat, args.tol)
            times[be] = secs
            rows.append({"case": name, "backend": be, "seconds": secs, "mean_T": mean, "n": args.n})
            print(f"{name:32s} {be:8s} {secs:9.3f} {mean:9.4f}")
        if len(times) == 2:
            print(f"{'':32s} speedup  {times['numpy'] / times['numba']:9.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
