"""Experiment configuration, KS statistics and the verification loop behind the CLI."""

from __future__ import annotations

import configparser
import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import levy_measure as lm
from . import weights as wl
from .limits import LimitLaw, limit_cdf
from .simulate import RatioBatch, SeriesConfig, ShellConfig, ratio_batch

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ComparisonResult",
    "ks_statistic",
    "ks_critical",
    "ks_two_sample",
    "ks_conditional_gaussian",
    "target_cdf",
    "run_verify",
    "write_verify_outputs",
]

TARGETS = ("limit_cdf", "weight_cdf", "point_mass", "none")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov


def ks_statistic(sample, cdf, convention: str = "midpoint") -> float:
    """Sup-distance between the empirical cdf of ``sample`` and ``cdf``.

    ``"classical"`` takes both one-sided gaps at each sorted point.
    ``"midpoint"`` compares ``cdf`` at each distinct value with the midpoint
    of the empirical jump there, so a sample tested against its own
    empirical cdf scores ``1/(2n)`` and a constant sample against the step at
    that constant scores ``1/2``.
    """
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise ValueError("sample must be nonempty")
    u, first = np.unique(x, return_index=True)
    last = np.append(first[1:], n)
    F = np.asarray(cdf(u), dtype=float)
    lo, hi = first / n, last / n
    if convention == "midpoint":
        return float(np.max(np.abs(F - 0.5 * (lo + hi))))
    if convention == "classical":
        return float(max(np.max(hi - F), np.max(F - lo)))
    raise ValueError(f"unknown KS convention {convention!r}")


def ks_conditional_gaussian(rt_values, mu: float, sigma: float, points: int = 4001) -> float:
    """Sup-distance between the law of T_t and ``N(mu, sigma²)`` for Gaussian weights.

    Given the jumps, ``T_t`` is exactly ``N(mu, sigma² R_t)``, so the cdf of
    T_t is the average of ``Φ((x - mu) / (sigma sqrt(R_i)))`` over replicates.
    This estimates the distance between the two laws without the
    ``O(1/sqrt(n))`` noise of the empirical cdf.  The sup is taken on a grid
    of ``points`` values in ``mu ± 8 sigma``.
    """
    r = np.asarray(rt_values, dtype=float).ravel()
    r = r[r > 0]
    if r.size == 0:
        raise ValueError("need at least one replicate with R_t > 0")
    z = np.linspace(-8.0, 8.0, points)
    sd = np.sqrt(r)
    F_t = np.empty(points)
    for k in range(0, points, 256):
        F_t[k:k + 256] = stats.norm.cdf(z[k:k + 256, None] / sd).mean(axis=1)
    return float(np.max(np.abs(F_t - stats.norm.cdf(z))))


def ks_critical(n: int, alpha: float = 0.01) -> float:
    """One-sample critical value of the KS statistic at level ``alpha``."""
    return float(stats.kstwo.isf(alpha, n))


def ks_two_sample(a, b, alpha: float = 0.01) -> tuple[float, float]:
    """``(statistic, asymptotic critical value at alpha)`` for two samples."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    d = float(stats.ks_2samp(a, b).statistic)
    n, m = a.size, b.size
    crit = float(stats.kstwobign.isf(alpha) * math.sqrt((n + m) / (n * m)))
    return d, crit


# ---------------------------------------------------------------------------
# configuration


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"expected numbers, got {text!r}") from exc


def _opt_float(sec, key):
    v = sec.get(key, "").strip()
    if v == "" or v.lower() == "none":
        return None
    try:
        return float(v)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected a number, got {v!r}") from exc


def _params(sec, skip):
    out = {}
    for k, v in sec.items():
        if k in skip:
            continue
        try:
            out[k] = float(v)
        except ValueError as exc:
            raise ConfigError(f"parameter {k}: expected a number, got {v!r}") from exc
    return out


@dataclass
class ExperimentConfig:
    """Everything one run needs; read from an INI file with :meth:`from_ini`.

    Sections: ``[run]`` (t, n, engine, seed, jobs, backend), ``[measure]``
    (name or csv plus numeric parameters), ``[weights]`` (name or csv plus
    parameters), ``[truncation]`` (jump_floor_eps, tol, compensate, ratio),
    ``[target]`` (kind, beta, alpha, ks_max, trend, ks_method, var_ratio_max,
    mean_sigmas), ``[limit]`` (x_min, x_max, points, method, beta, scale_c)
    and ``[diagnose]`` (end, decades, per_decade).
    """

    measure: str = "stable"
    measure_params: dict = field(default_factory=lambda: {"beta": 0.5})
    measure_csv: str | None = None
    weights: str = "two_point"
    weight_params: dict = field(default_factory=dict)
    weights_csv: str | None = None
    t_values: tuple = (1.0,)
    n: int = 10_000
    engine: str = "series"
    seed: int = 0
    jobs: int = 1
    backend: str | None = None
    jump_floor_eps: float | None = None
    tol: float = 1e-6
    compensate: bool = True
    shell_ratio: float = 0.5
    target: str = "limit_cdf"
    beta: float | None = None
    alpha: float = 0.01
    ks_max: float | None = None
    trend: str = "none"
    ks_method: str = "empirical"
    var_ratio_max: float | None = None
    mean_sigmas: float = 4.0
    limit_x: tuple = (0.0, 1.0, 101)
    limit_method: str = "closed"
    scale_c: float = 1.0
    diag_end: str = "zero"
    diag_decades: int = 6
    diag_per_decade: int = 64
    out: str = "out"

    def __post_init__(self):
        self.validate()

    def validate(self):
        self.t_values = tuple(float(t) for t in self.t_values)
        if not self.t_values or any(not t > 0 for t in self.t_values):
            raise ConfigError("t values must be positive")
        if self.n < 1:
            raise ConfigError("n must be at least 1")
        if self.engine not in ("series", "layered"):
            raise ConfigError("engine must be 'series' or 'layered'")
        if self.target not in TARGETS:
            raise ConfigError(f"target must be one of {TARGETS}")
        if self.trend not in ("none", "decreasing"):
            raise ConfigError("trend must be 'none' or 'decreasing'")
        if self.ks_method not in ("empirical", "conditional"):
            raise ConfigError("ks_method must be 'empirical' or 'conditional'")
        if self.ks_method == "conditional" and (self.target != "weight_cdf" or self.weights != "gaussian"
                                                 or self.weights_csv is not None):
            raise ConfigError("ks_method = conditional needs gaussian weights and target weight_cdf")
        if self.backend not in (None, "auto", "numba", "numpy"):
            raise ConfigError("backend must be auto, numba or numpy")
        if self.limit_method not in ("closed", "fourier"):
            raise ConfigError("limit method must be 'closed' or 'fourier'")
        if self.diag_end not in ("zero", "infinity"):
            raise ConfigError("diagnose end must be 'zero' or 'infinity'")
        for p in (self.measure_csv, self.weights_csv):
            if p is not None and not os.path.isfile(p):
                raise ConfigError(f"file not found: {p}")
        if self.beta is not None and not 0.0 <= self.beta <= 1.0:
            raise ConfigError("beta must lie in [0, 1]")
        if not self.scale_c > 0:
            raise ConfigError("scale_c must be positive")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")

    @classmethod
    def from_ini(cls, path, overrides: dict | None = None) -> "ExperimentConfig":
        cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        if path is not None:
            if not os.path.isfile(path):
                raise ConfigError(f"config file not found: {path}")
            try:
                cp.read(path)
            except configparser.Error as exc:
                raise ConfigError(f"cannot parse {path}: {exc}") from exc
        for key, val in (overrides or {}).items():
            sec, _, opt = key.partition(".")
            if not opt:
                raise ConfigError(f"override {key!r} must look like section.key")
            if not cp.has_section(sec):
                cp.add_section(sec)
            cp.set(sec, opt, str(val))
        base = os.path.dirname(os.path.abspath(path)) if path else os.getcwd()

        def rel(p):
            return p if p is None or os.path.isabs(p) else os.path.join(base, p)

        kw = {}
        try:
            if cp.has_section("run"):
                r = cp["run"]
                if "t" in r:
                    kw["t_values"] = _floats(r["t"])
                kw["n"] = r.getint("n", cls.n)
                kw["engine"] = r.get("engine", cls.engine).strip()
                kw["seed"] = r.getint("seed", cls.seed)
                kw["jobs"] = r.getint("jobs", cls.jobs)
                b = r.get("backend", "auto").strip()
                kw["backend"] = None if b == "auto" else b
                kw["out"] = r.get("out", cls.out)
            if cp.has_section("measure"):
                m = cp["measure"]
                kw["measure"] = m.get("name", "stable").strip()
                kw["measure_csv"] = rel(m.get("csv"))
                kw["measure_params"] = _params(m, {"name", "csv"})
            if cp.has_section("weights"):
                w = cp["weights"]
                kw["weights"] = w.get("name", "two_point").strip()
                kw["weights_csv"] = rel(w.get("csv"))
                kw["weight_params"] = _params(w, {"name", "csv"})
            if cp.has_section("truncation"):
                tr = cp["truncation"]
                kw["jump_floor_eps"] = _opt_float(tr, "jump_floor_eps")
                kw["tol"] = tr.getfloat("tol", cls.tol)
                kw["compensate"] = tr.getboolean("compensate", cls.compensate)
                kw["shell_ratio"] = tr.getfloat("ratio", cls.shell_ratio)
            if cp.has_section("target"):
                tg = cp["target"]
                kw["target"] = tg.get("kind", cls.target).strip()
                kw["beta"] = _opt_float(tg, "beta")
                kw["alpha"] = tg.getfloat("alpha", cls.alpha)
                kw["ks_max"] = _opt_float(tg, "ks_max")
                kw["trend"] = tg.get("trend", cls.trend).strip()
                kw["ks_method"] = tg.get("ks_method", cls.ks_method).strip()
                kw["var_ratio_max"] = _opt_float(tg, "var_ratio_max")
                kw["mean_sigmas"] = tg.getfloat("mean_sigmas", cls.mean_sigmas)
            if cp.has_section("limit"):
                li = cp["limit"]
                kw["limit_x"] = (li.getfloat("x_min", 0.0), li.getfloat("x_max", 1.0),
                                 li.getint("points", 101))
                kw["limit_method"] = li.get("method", cls.limit_method).strip()
                kw["scale_c"] = li.getfloat("scale_c", cls.scale_c)
                if "beta" in li:
                    kw["beta"] = li.getfloat("beta")
            if cp.has_section("diagnose"):
                d = cp["diagnose"]
                kw["diag_end"] = d.get("end", cls.diag_end).strip()
                kw["diag_decades"] = d.getint("decades", cls.diag_decades)
                kw["diag_per_decade"] = d.getint("per_decade", cls.diag_per_decade)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc
        return cls(**kw)

    # -- builders ---------------------------------------------------------------
    def build_measure(self) -> lm.LevyMeasure:
        try:
            if self.measure_csv is not None:
                return lm.from_csv(self.measure_csv, scale=self.measure_params.get("scale", 1.0))
            return lm.from_name(self.measure, **self.measure_params)
        except TypeError as exc:
            raise ConfigError(f"bad parameters for measure {self.measure!r}: {exc}") from exc

    def build_weights(self) -> wl.WeightLaw:
        try:
            if self.weights_csv is not None:
                return wl.empirical_from_csv(self.weights_csv)
            return wl.from_name(self.weights, **self.weight_params)
        except TypeError as exc:
            raise ConfigError(f"bad parameters for weights {self.weights!r}: {exc}") from exc

    def limit_beta(self, measure: lm.LevyMeasure | None = None) -> float:
        if self.beta is not None:
            return float(self.beta)
        measure = measure or self.build_measure()
        if isinstance(measure, lm.StablePositive):
            return measure.beta
        raise ConfigError("target beta is required unless the measure is stable")

    def engine_config(self):
        if self.engine == "series":
            return SeriesConfig(jump_floor_eps=self.jump_floor_eps, tol=self.tol, compensate=self.compensate)
        return ShellConfig(small_shell_floor=self.jump_floor_eps, ratio=self.shell_ratio, tol=self.tol,
                           compensate=self.compensate)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["t_values"] = list(self.t_values)
        d["limit_x"] = list(self.limit_x)
        return d


# ---------------------------------------------------------------------------
# verification


@dataclass
class ComparisonResult:
    """One row of a verification run.

    ``passes`` maps check names to booleans; only the checks implied by the
    target are present.  ``mean_T`` and ``se_T`` use replicates with
    ``V_t > 0`` (for a finite measure T_t is undefined without jumps), while
    ``mean_R`` counts those replicates as ``R_t = 0`` like ``expected_rt``.
    With ``ks_method = conditional`` the ks column holds the conditional
    Gaussian distance of :func:`ks_conditional_gaussian`.
    """

    t: float
    n: int
    ks_statistic: float
    ks_critical_at_alpha: float
    mean_T: float
    se_T: float
    mean_R: float
    se_R: float
    var_T: float
    n_zero_v: int
    passes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.passes.values())

    def row(self) -> dict:
        d = asdict(self)
        d.pop("passes")
        for k in sorted(self.passes):
            d[f"pass_{k}"] = int(self.passes[k])
        d["pass"] = int(self.passed)
        return d


def target_cdf(cfg: ExperimentConfig, measure, weights):
    """Target cdf for the configured comparison, or None."""
    if cfg.target == "limit_cdf":
        law = LimitLaw(cfg.limit_beta(measure), weights, cfg.scale_c)
        return lambda x: limit_cdf(x, law)
    if cfg.target == "weight_cdf":
        return weights.cdf
    if cfg.target == "point_mass":
        ex = weights.mean
        return lambda x: (np.asarray(x) >= ex).astype(float)
    return None


def run_verify(cfg: ExperimentConfig, progress=None) -> tuple[list, list]:
    """Simulate one batch per ``t`` and compare it with the target law.

    Returns ``(results, batches)``.  Seeds for the ``t`` values are spawned
    from ``cfg.seed`` so every batch is reproducible on its own.
    """
    measure = cfg.build_measure()
    weights = cfg.build_weights()
    cdf = target_cdf(cfg, measure, weights)
    ecfg = cfg.engine_config()
    seeds = np.random.SeedSequence(cfg.seed).generate_state(len(cfg.t_values))
    ex, varx = weights.mean, weights.variance
    results, batches = [], []
    for t, s in zip(cfg.t_values, seeds):
        b = ratio_batch(t, measure, weights, cfg.n, engine=cfg.engine, cfg=ecfg, seed=int(s),
                        backend=cfg.backend, jobs=cfg.jobs)
        keep = ~b.zero_v
        T, R = b.ratios[keep], b.rt_values[keep]
        m_T, se_T = b.mean_se(T) if T.size else (math.nan, math.nan)
        m_R, se_R = b.mean_se(b.rt_values)
        var_T = float(np.var(T, ddof=1)) if T.size > 1 else math.nan
        if cfg.ks_method == "conditional":
            ks = ks_conditional_gaussian(R, weights.params["mu"], weights.params["sigma"])
        else:
            ks = ks_statistic(T, cdf) if cdf is not None and T.size else math.nan
        crit = ks_critical(max(T.size, 1), cfg.alpha)
        passes = {"mean": bool(abs(m_T - ex) <= cfg.mean_sigmas * se_T)}
        if cfg.target == "limit_cdf":
            passes["ks"] = bool(ks <= (cfg.ks_max if cfg.ks_max is not None else crit))
        elif cfg.target == "weight_cdf" and cfg.ks_max is not None and t == cfg.t_values[-1]:
            passes["ks"] = bool(ks <= cfg.ks_max)
        elif cfg.target == "point_mass" and cfg.var_ratio_max is not None:
            passes["variance"] = bool(var_T <= cfg.var_ratio_max * varx)
        if cfg.trend == "decreasing" and results:
            passes["trend"] = bool(ks < results[-1].ks_statistic)
        r = ComparisonResult(float(t), int(b.n), ks, crit, m_T, se_T, m_R, se_R, var_T,
                             b.n_zero_v, passes)
        results.append(r)
        batches.append(b)
        if progress is not None:
            progress(r)
    return results, batches


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def write_verify_outputs(out_dir, cfg: ExperimentConfig, results: list, batches: list[RatioBatch],
                         fmt: str = "csv") -> list:
    """Write the comparison table, one batch file per t and a manifest; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    rows = [r.row() for r in results]
    cols = list(rows[0]) if rows else []
    if fmt == "csv":
        p = os.path.join(out_dir, "comparison.csv")
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for row in rows:
                w.writerow([_fmt(row[c]) for c in cols])
        paths.append(p)
        for i, b in enumerate(batches):
            p = os.path.join(out_dir, f"batch_{i}.csv")
            b.to_csv(p)
            paths.append(p)
    else:
        p = os.path.join(out_dir, "comparison.json")
        with open(p, "w") as fh:
            json.dump(rows, fh, indent=2, sort_keys=True)
            fh.write("\n")
        paths.append(p)
    p = os.path.join(out_dir, "manifest.json")
    manifest = {
        "command": "verify",
        # the output directory is left out so reruns elsewhere compare byte for byte
        "config": {k: v for k, v in cfg.to_dict().items() if k != "out"},
        "versions": _versions(),
        "batches": [b.sidecar() for b in batches],
        "passed": all(r.passed for r in results),
    }
    with open(p, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    paths.append(p)
    return paths


def _versions() -> dict:
    import platform

    import scipy

    from . import __version__
    from ._accel import HAVE_NUMBA

    out = {"snlevy": __version__, "python": platform.python_version(), "numpy": np.__version__,
           "scipy": scipy.__version__, "numba": None}
    if HAVE_NUMBA:
        import numba

        out["numba"] = numba.__version__
    return out


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
