"""Command-line front end: ``snlevy {simulate,limit,diagnose,verify,er-rt}``.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration
error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .diagnostics import DiagnosticsError, diagnose
from .experiment import ConfigError, ExperimentConfig, run_verify, write_verify_outputs
from .levy_measure import DivergenceError, InversionError, LevyMeasureError
from .limits import LimitError, LimitLaw, expected_rt, fourier_cdf, limit_cdf, limit_density
from .simulate import TruncationBudgetError, ratio_batch
from .weights import WeightError

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", metavar="PATH", help="INI experiment file")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--jobs", type=int, help="worker threads for batch generation")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="table format")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one config entry (repeatable)")
    p.add_argument("-q", "--quiet", action="store_true", help="only print errors")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="snlevy", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="draw T_t, R_t, V_t batches")
    sp = sub.add_parser("limit", parents=[common], help="tabulate the limit cdf and density")
    sp.add_argument("--method", choices=("closed", "fourier"), help="cdf route")
    sp = sub.add_parser("diagnose", parents=[common], help="ratio scans and regime classification")
    sp.add_argument("--end", choices=("zero", "infinity"), help="end of the tail to scan")
    sub.add_parser("verify", parents=[common], help="simulate and compare with the target law")
    sub.add_parser("er-rt", parents=[common], help="E R_t by quadrature next to the Monte Carlo mean")
    return ap


def _overrides(args) -> dict:
    out = {}
    for item in args.set:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        out[key.strip()] = val.strip()
    if args.seed is not None:
        out["run.seed"] = str(args.seed)
    if args.jobs is not None:
        out["run.jobs"] = str(args.jobs)
    if args.out is not None:
        out["run.out"] = args.out
    if getattr(args, "method", None):
        out["limit.method"] = args.method
    if getattr(args, "end", None):
        out["diagnose.end"] = args.end
    return out


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _say(args, msg):
    if not args.quiet:
        print(msg)


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(cfg: ExperimentConfig, args) -> int:
    measure, weights = cfg.build_measure(), cfg.build_weights()
    seeds = np.random.SeedSequence(cfg.seed).generate_state(len(cfg.t_values))
    ecfg = cfg.engine_config()
    for i, (t, s) in enumerate(zip(cfg.t_values, seeds)):
        b = ratio_batch(t, measure, weights, cfg.n, engine=cfg.engine, cfg=ecfg, seed=int(s),
                        backend=cfg.backend, jobs=cfg.jobs)
        stem = os.path.join(cfg.out, f"batch_{i}")
        if args.format == "csv":
            b.to_csv(stem + ".csv")
            b.to_json(stem + ".json")
        else:
            _write_json(stem + ".json", {**b.sidecar(), "T": b.ratios.tolist(), "R": b.rt_values.tolist(),
                                         "V": b.v_values.tolist()})
        m, se = b.mean_se()
        _say(args, f"t={t:g}  n={b.n}  mean T={m:.6f} (se {se:.2g})  mean R={np.mean(b.rt_values):.6f}"
                   f"  -> {stem}.{args.format}")
    return EXIT_OK


def cmd_limit(cfg: ExperimentConfig, args) -> int:
    weights = cfg.build_weights()
    beta = cfg.limit_beta()
    law = LimitLaw(beta, weights, cfg.scale_c)
    lo, hi, npts = cfg.limit_x
    x = np.linspace(lo, hi, int(npts))
    errs = None
    if cfg.limit_method == "fourier" and 0 < beta < 1:
        vals = [fourier_cdf(v, law) for v in x]
        cdf = np.array([v[0] for v in vals])
        errs = [v[1] for v in vals]
    else:
        cdf = np.asarray(limit_cdf(x, law), dtype=float)
    if 0 < beta < 1:
        dens = np.asarray(limit_density(x, law), dtype=float)
    else:
        dens = np.full(x.size, math.nan)
    if args.format == "csv":
        with open(os.path.join(cfg.out, "limit.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "cdf", "density"])
            for row in zip(x, cdf, dens):
                w.writerow([f"{v:.17g}" for v in row])
    side = {
        "law": law.describe(),
        "method": cfg.limit_method if 0 < beta < 1 else "degenerate",
        "grid": {"x_min": lo, "x_max": hi, "points": int(npts)},
        "max_quadrature_error": max(errs) if errs else None,
    }
    if args.format == "json":
        side.update(x=x.tolist(), cdf=cdf.tolist(), density=[None if math.isinf(d) or math.isnan(d)
                                                             else d for d in dens.tolist()])
    _write_json(os.path.join(cfg.out, "limit.json"), side)
    _say(args, f"limit law beta={beta:g}: {int(npts)} points -> {cfg.out}")
    return EXIT_OK


def cmd_diagnose(cfg: ExperimentConfig, args) -> int:
    measure = cfg.build_measure()
    rep = diagnose(measure, cfg.diag_end, cfg.diag_decades, cfg.diag_per_decade)
    rep.to_json(os.path.join(cfg.out, "diagnostics.json"))
    if args.format == "csv":
        rep.to_csv(cfg.out)
    _say(args, f"{measure!r} toward {cfg.diag_end}: {rep.classification.label()}")
    for name, s in rep.scans.items():
        _say(args, f"  {name:24s} {s.kind} ~ {s.estimate:.6g}  slope {s.slope:+.3g}  "
                   f"p {s.p_value:.2g}  flag {s.flag}")
    _say(args, f"  note: {rep.note}")
    return EXIT_OK


def cmd_verify(cfg: ExperimentConfig, args) -> int:
    def progress(r):
        status = "PASS" if r.passed else "FAIL"
        _say(args, f"[{status}] t={r.t:g} n={r.n} ks={r.ks_statistic:.5f} (crit {r.ks_critical_at_alpha:.5f})"
                   f" mean T={r.mean_T:.5f}±{r.se_T:.2g} var T={r.var_T:.5g} checks={r.passes}")

    t0 = time.perf_counter()
    results, batches = run_verify(cfg, progress)
    write_verify_outputs(cfg.out, cfg, results, batches, args.format)
    # timing goes to its own file so the main outputs stay byte-identical across reruns
    _write_json(os.path.join(cfg.out, "timing.json"), {"wall_seconds": round(time.perf_counter() - t0, 3)})
    ok = all(r.passed for r in results)
    _say(args, "verify: " + ("all checks passed" if ok else "some checks FAILED"))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_er_rt(cfg: ExperimentConfig, args) -> int:
    measure, weights = cfg.build_measure(), cfg.build_weights()
    seeds = np.random.SeedSequence(cfg.seed).generate_state(len(cfg.t_values))
    rows = []
    for t, s in zip(cfg.t_values, seeds):
        q = expected_rt(t, measure)
        b = ratio_batch(t, measure, weights, cfg.n, engine=cfg.engine, cfg=cfg.engine_config(),
                        seed=int(s), backend=cfg.backend, jobs=cfg.jobs)
        # replicates without jumps count as R = 0, matching the quadrature
        m, se = b.mean_se(b.rt_values)
        rows.append({"t": t, "expected_rt": q, "mc_mean_R": m, "mc_se_R": se, "n": b.n})
        _say(args, f"t={t:<10g} E R_t={q:.8f}   Monte Carlo {m:.6f} ± {se:.2g}")
    if args.format == "csv":
        with open(os.path.join(cfg.out, "er_rt.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(list(rows[0]))
            for r in rows:
                w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in r.values()])
    else:
        _write_json(os.path.join(cfg.out, "er_rt.json"), rows)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "limit": cmd_limit,
    "diagnose": cmd_diagnose,
    "verify": cmd_verify,
    "er-rt": cmd_er_rt,
}

NUMERIC_ERRORS = (DivergenceError, InversionError, TruncationBudgetError, LimitError, DiagnosticsError,
                  FloatingPointError, ArithmeticError)
CONFIG_ERRORS = (ConfigError, LevyMeasureError, WeightError, OSError)


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        cfg = ExperimentConfig.from_ini(args.config, _overrides(args))
        os.makedirs(cfg.out, exist_ok=True)
        return COMMANDS[args.command](cfg, args)
    except NUMERIC_ERRORS as exc:
        print(f"snlevy: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except CONFIG_ERRORS as exc:
        print(f"snlevy: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
