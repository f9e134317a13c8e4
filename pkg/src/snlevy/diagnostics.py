"""Grid scans of the truncated-moment ratios that decide the limit regime.

Each scan evaluates one ratio of tail functionals on a geometric grid that
runs toward ``0`` or ``∞`` and summarizes its upper or lower limit.  A
finite grid cannot certify a limit: every summary is an estimate with a
trend test attached, and reports say so.

Trend test: the grid is cut into decades and the running maximum (for
limsup) or minimum (for liminf) of the ratio is taken at the end of each
decade.  ``log10`` of those values is regressed on the decade index; a
slope beyond ``slope_tol`` in the relevant direction with one-sided
p-value below ``alpha`` flags divergence.
"""

from __future__ import annotations

import csv
import enum
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .levy_measure import LevyMeasure

__all__ = [
    "DiagnosticsError",
    "Regime",
    "ScanResult",
    "IndexEstimate",
    "Classification",
    "DiagnosticsReport",
    "geometric_grid",
    "start_point",
    "centered_feller_scan",
    "relative_stability_scan",
    "stochastic_compactness_scan",
    "rv_index_estimate",
    "classify",
    "diagnose",
]

NOTE = "Grid estimates of asymptotic quantities; they screen a measure but do not prove a limit."


class DiagnosticsError(ValueError):
    pass


class Regime(enum.Enum):
    REGULARLY_VARYING = "RegularlyVarying"
    SLOWLY_VARYING = "SlowlyVarying"
    INDEX_ONE = "IndexOne"
    CENTERED_FELLER_LIKELY = "CenteredFellerLikely"
    NOT_FELLER_LIKELY = "NotFellerLikely"
    INCONCLUSIVE = "Inconclusive"


def geometric_grid(end: str = "zero", decades: int = 6, per_decade: int = 64, x0: float = 1.0) -> np.ndarray:
    """``x0 * 10^(∓k/per_decade)``, ``k = 0..decades*per_decade``, ordered toward ``end``."""
    if end not in ("zero", "infinity"):
        raise DiagnosticsError("end must be 'zero' or 'infinity'")
    if decades < 1 or per_decade < 1 or not x0 > 0:
        raise DiagnosticsError("need decades >= 1, per_decade >= 1 and x0 > 0")
    k = np.arange(decades * per_decade + 1) / per_decade
    sign = -1.0 if end == "zero" else 1.0
    return x0 * 10.0 ** (sign * k)


def start_point(measure: LevyMeasure, end: str, per_decade: int = 64, x0: float = 1.0) -> float:
    """``x0``, moved toward 0 one grid step at a time until the tail is positive there."""
    step = 10.0 ** (-1.0 / per_decade)
    for _ in range(10 * per_decade):
        if float(measure.tail(x0)) > 0:
            return x0
        x0 *= step
    raise DiagnosticsError("tail vanishes near the starting point")


def _resolve_grid(end, grid, decades, per_decade, x0):
    if grid is None:
        return geometric_grid(end, decades, per_decade, x0), per_decade
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size < 2 or np.any(g <= 0):
        raise DiagnosticsError("grid must be a 1-d array of positive points")
    d = np.diff(g)
    if (end == "zero" and np.any(d >= 0)) or (end == "infinity" and np.any(d <= 0)):
        raise DiagnosticsError(f"grid must be strictly monotone toward {end}")
    span = abs(math.log10(g[-1] / g[0]))
    return g, max(1, int(round((g.size - 1) / max(span, 1e-12))))


@dataclass
class ScanResult:
    """One ratio on a grid with its limit estimate and trend test.

    ``kind`` is ``"limsup"`` or ``"liminf"``.  ``flag`` is True when the
    trend test finds divergence (to ∞ for limsup, to 0 for liminf), or, for
    liminf, when the estimate itself is below ``tol``.
    """

    condition: str
    kind: str
    end: str
    grid: np.ndarray
    ratios: np.ndarray
    estimate: float
    slope: float
    p_value: float
    flag: bool

    def summary(self) -> dict:
        return {
            "condition": self.condition,
            "kind": self.kind,
            "estimate": self.estimate,
            "trend_slope_log10_per_decade": self.slope,
            "trend_p_value": self.p_value,
            "flag": bool(self.flag),
        }


def _trend(ratios, per_decade, kind):
    """Regress log10 running extremes at decade ends on decade index."""
    run = np.maximum.accumulate(ratios) if kind == "limsup" else np.minimum.accumulate(ratios)
    idx = np.arange(per_decade, ratios.size, per_decade)
    if idx.size == 0 or idx[-1] != ratios.size - 1:
        idx = np.append(idx, ratios.size - 1)
    y = np.log10(np.maximum(run[idx], 1e-300))
    if idx.size < 3 or np.ptp(y) <= 1e-12 * max(1.0, np.max(np.abs(y))):
        return 0.0, 1.0
    alt = "greater" if kind == "limsup" else "less"
    fit = stats.linregress(np.arange(y.size, dtype=float), y, alternative=alt)
    return float(fit.slope), float(fit.pvalue)


def _scan(condition, kind, end, grid, ratios, per_decade, slope_tol, alpha, tol):
    ratios = np.asarray(ratios, dtype=float)
    if not np.all(np.isfinite(ratios)) or np.any(ratios < 0):
        raise DiagnosticsError(f"{condition}: ratio not finite and nonnegative on the grid")
    slope, p = _trend(ratios, per_decade, kind)
    last = ratios[-(per_decade + 1):]
    if kind == "limsup":
        est = float(np.max(last))
        flag = slope > slope_tol and p < alpha
    else:
        est = float(np.min(last))
        flag = (slope < -slope_tol and p < alpha) or est < tol
    return ScanResult(condition, kind, end, grid, ratios, est, slope, p, bool(flag))


def _functional(f, x, name):
    out = np.empty(x.size)
    for i, v in enumerate(x):
        out[i] = f(float(v))
    if np.any(out <= 0):
        bad = x[np.argmax(out <= 0)]
        raise DiagnosticsError(f"{name} vanishes at x={bad:g} (grid below the support)")
    return out


def centered_feller_scan(measure: LevyMeasure, end: str = "zero", grid=None, decades: int = 6,
                         per_decade: int = 64, x0: float = 1.0, slope_tol: float = 0.05,
                         alpha: float = 0.01) -> ScanResult:
    """``v² tail(v) / V2(v)`` on the grid with a limsup estimate."""
    g, pd = _resolve_grid(end, grid, decades, per_decade, x0)
    v2 = _functional(measure.second_truncated_moment, g, "V2")
    r = g * g * np.asarray(measure.tail(g), dtype=float) / v2
    return _scan("centered_feller", "limsup", end, g, r, pd, slope_tol, alpha, 0.0)


def relative_stability_scan(measure: LevyMeasure, end: str = "zero", grid=None, decades: int = 6,
                            per_decade: int = 64, x0: float = 1.0, slope_tol: float = 0.05,
                            alpha: float = 0.01, tol: float = 0.05) -> ScanResult:
    """``x tail(x) / I(x)`` on the grid with a liminf estimate.

    ``flag`` True means the liminf looks like 0, so the bounded-away-from-0
    condition used for ``E R_t`` fails.
    """
    g, pd = _resolve_grid(end, grid, decades, per_decade, x0)
    i1 = _functional(measure.small_jump_mean, g, "I")
    r = g * np.asarray(measure.tail(g), dtype=float) / i1
    return _scan("relative_stability", "liminf", end, g, r, pd, slope_tol, alpha, tol)


def stochastic_compactness_scan(measure: LevyMeasure, end: str = "zero", grid=None, decades: int = 6,
                                per_decade: int = 64, x0: float = 1.0, slope_tol: float = 0.05,
                                alpha: float = 0.01) -> ScanResult:
    """``t ∫_0^t x Λ(dx) / (V2(t) + t² tail(t))`` on the grid with a limsup estimate."""
    g, pd = _resolve_grid(end, grid, decades, per_decade, x0)
    tail = np.asarray(measure.tail(g), dtype=float)
    i1 = _functional(measure.small_jump_mean, g, "I")
    v2 = np.array([measure.second_truncated_moment(float(v)) for v in g])
    # ∫_(0,t] x Λ(dx) = I(t) - t tail(t)
    first = np.maximum(i1 - g * tail, 0.0)
    den = v2 + g * g * tail
    if np.any(den <= 0):
        raise DiagnosticsError("V2 + t² tail vanishes on the grid")
    r = g * first / den
    return _scan("stochastic_compactness", "limsup", end, g, r, pd, slope_tol, alpha, 0.0)


@dataclass
class IndexEstimate:
    """Tail index fit: ``slope`` of log tail vs log x on the last decades, and ``index``,
    the local slope extrapolated to ``1/|log x| = 0``.

    ``residual`` is the RMS misfit of the local slopes about that extrapolation;
    ``collapse_error`` is the worst relative gap in ``t tail(v t^(1/b)) ≈ v^(-b)``
    over two ``t`` values (None when the index is too close to 0 to rescale).
    """

    slope: float
    index: float
    residual: float
    collapse_error: float | None

    def summary(self) -> dict:
        return {
            "slope": self.slope,
            "index": self.index,
            "residual": self.residual,
            "collapse_error": self.collapse_error,
        }


def rv_index_estimate(measure: LevyMeasure, end: str = "zero", grid=None, decades: int = 6,
                      per_decade: int = 64, x0: float = 1.0, fit_decades: int = 3) -> IndexEstimate:
    g, pd = _resolve_grid(end, grid, decades, per_decade, x0)
    if abs(math.log10(g[-1] / g[0])) < 3 - 1e-9:
        raise DiagnosticsError("index fit needs a grid spanning at least 3 decades")
    lx = np.log(g)
    lt = np.asarray(measure.log_tail_at_log(lx), dtype=float)
    if not np.all(np.isfinite(lt)):
        raise DiagnosticsError("tail vanishes on the grid; index fit is degenerate")
    k = min(g.size, fit_decades * pd + 1)
    tx, ty = lx[-k:], lt[-k:]
    if np.ptp(tx) == 0:
        raise DiagnosticsError("degenerate grid")
    slope = float(np.polyfit(tx, ty, 1)[0])

    # local slopes on half-decade windows of the fitted tail, extrapolated in 1/|log x|
    w = max(2, pd // 2)
    starts = np.arange(lx.size - k, lx.size - w, w)
    loc = (lt[starts + w] - lt[starts]) / (lx[starts + w] - lx[starts])
    mid = 0.5 * (lx[starts + w] + lx[starts])
    keep = np.abs(mid) > 1.0
    if keep.sum() >= 3:
        h = 1.0 / np.abs(mid[keep])
        coef = np.polyfit(h, loc[keep], 1)
        index = float(coef[1])
        residual = float(np.sqrt(np.mean((np.polyval(coef, h) - loc[keep]) ** 2)))
    else:
        index, residual = slope, float(np.std(loc))

    collapse = None
    b = -index
    if b > 0.05:
        v = np.logspace(-1, 1, 9)
        ts = (1e-2, 1e-4) if end == "zero" else (1e2, 1e4)
        errs = []
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            for t in ts:
                lhs = t * np.asarray(measure.tail(v * t ** (1.0 / b)), dtype=float)
                errs.append(np.max(np.abs(lhs / v ** (-b) - 1.0)))
        collapse = float(np.nan_to_num(max(errs), nan=np.inf))
    return IndexEstimate(slope, index, residual, collapse)


@dataclass
class Classification:
    regime: Regime
    beta: float | None = None

    def label(self) -> str:
        if self.regime is Regime.REGULARLY_VARYING:
            return f"{self.regime.value}({self.beta:.4g})"
        return self.regime.value


def classify(index: IndexEstimate, feller: ScanResult, tol: float = 0.05) -> Classification:
    """Regime from the index fit, falling back to the centered Feller scan."""
    if index.residual < tol:
        b = -index.index
        if abs(b) < tol:
            return Classification(Regime.SLOWLY_VARYING, 0.0)
        if abs(b - 1.0) < tol:
            return Classification(Regime.INDEX_ONE, 1.0)
        if 0.0 < b < 1.0:
            return Classification(Regime.REGULARLY_VARYING, b)
    if feller.flag:
        return Classification(Regime.NOT_FELLER_LIKELY)
    if math.isfinite(feller.estimate) and feller.slope <= tol:
        return Classification(Regime.CENTERED_FELLER_LIKELY)
    return Classification(Regime.INCONCLUSIVE)


@dataclass
class DiagnosticsReport:
    end: str
    grid: np.ndarray
    scans: dict
    index: IndexEstimate
    classification: Classification
    measure: dict = field(default_factory=dict)
    note: str = NOTE

    @property
    def ratios(self) -> dict:
        return {k: s.ratios for k, s in self.scans.items()}

    @property
    def estimated_limsup(self) -> dict:
        return {k: s.estimate for k, s in self.scans.items() if s.kind == "limsup"}

    @property
    def estimated_liminf(self) -> dict:
        return {k: s.estimate for k, s in self.scans.items() if s.kind == "liminf"}

    @property
    def rv_index_estimate(self) -> float:
        return self.index.index

    def to_dict(self) -> dict:
        return {
            "end": self.end,
            "measure": self.measure,
            "grid": {"points": int(self.grid.size), "first": float(self.grid[0]), "last": float(self.grid[-1])},
            "scans": {k: s.summary() for k, s in self.scans.items()},
            "rv_index": self.index.summary(),
            "classification": self.classification.label(),
            "note": self.note,
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def to_csv(self, directory) -> list:
        """One ``(x, ratio)`` file per condition; returns the paths written."""
        paths = []
        for name, s in self.scans.items():
            path = os.path.join(directory, f"{name}.csv")
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["x", "ratio"])
                for x, r in zip(s.grid, s.ratios):
                    w.writerow([f"{x:.17g}", f"{r:.17g}"])
            paths.append(path)
        return paths


def diagnose(measure: LevyMeasure, end: str = "zero", decades: int = 6, per_decade: int = 64,
             x0: float = 1.0, tol: float = 0.05, alpha: float = 0.01) -> DiagnosticsReport:
    """Run every scan and the index fit on one grid and classify the measure."""
    g = geometric_grid(end, decades, per_decade, start_point(measure, end, per_decade, x0))
    kw = dict(end=end, grid=g, slope_tol=tol, alpha=alpha)
    scans = {
        "centered_feller": centered_feller_scan(measure, **kw),
        "relative_stability": relative_stability_scan(measure, tol=tol, **kw),
        "stochastic_compactness": stochastic_compactness_scan(measure, **kw),
    }
    index = rv_index_estimate(measure, end=end, grid=g)
    cls = classify(index, scans["centered_feller"], tol)
    return DiagnosticsReport(end, g, scans, index, cls, measure.describe())
