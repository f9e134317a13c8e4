"""Monte Carlo samplers for (U_t, V_t) and batches of T_t = U_t / V_t.

Two constructions of the same law are provided:

* the **series** engine maps unit-rate Poisson arrival times ``S_i`` to
  jumps ``φ(S_i / t)``, largest first;
* the **layered** engine splits the Poisson clock into shells and draws a
  Poisson number of jumps per shell, each by inverse-tail sampling.

Both engines drop the jumps smaller than a floor ``eps`` (equivalently
arrival times beyond ``s* = tail(eps)``).  The dropped part has conditional
mean ``t ∫_{z}^∞ φ(s) ds`` given the last kept arrival ``z``; by default
this mean is added back to V (and ``EX`` times it to U), which removes the
truncation bias to first order.  The residual error then has size
``sqrt(t ∫_z^∞ φ²)`` rather than the discarded mass itself.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from ._accel import resolve_backend
from .levy_measure import LevyMeasure
from .weights import WeightLaw

__all__ = [
    "SeriesConfig",
    "ShellConfig",
    "RatioBatch",
    "DominanceEstimate",
    "TruncationBudgetError",
    "Truncation",
    "series_truncation",
    "resolve_truncation",
    "cut_for_first_arrival",
    "shell_boundaries",
    "series_sample_uv",
    "layered_sample_uv",
    "ratio_batch",
    "rt_batch",
    "dominance_probability",
]

PARTITION_SIZE = 4096


class TruncationBudgetError(RuntimeError):
    """max_terms was reached while the neglected mass still exceeded the budget."""


@dataclass(frozen=True)
class SeriesConfig:
    """Truncation controls for the series engine.

    ``jump_floor_eps=None`` picks the floor automatically so that the
    residual error is at most ``tol`` times the typical size of the largest
    jump.  ``rel_floor`` (0 disables) additionally stops a replicate once a
    term falls below ``rel_floor`` times its first term.
    """

    jump_floor_eps: float | None = None
    tol: float = 1e-6
    rel_floor: float = 0.0
    max_terms: int = 50_000_000
    relative_mass_budget: float = 1e-2
    compensate: bool = True

    def __post_init__(self):
        if self.jump_floor_eps is not None and not self.jump_floor_eps > 0:
            raise ValueError("jump_floor_eps must be positive")
        if not self.max_terms >= 1:
            raise ValueError("max_terms must be at least 1")
        if not self.tol > 0 or not self.relative_mass_budget > 0:
            raise ValueError("tol and relative_mass_budget must be positive")
        if not 0 <= self.rel_floor < 1:
            raise ValueError("rel_floor must lie in [0, 1)")


@dataclass(frozen=True)
class ShellConfig:
    """Shell layout for the layered engine.

    ``shell_boundaries`` is a decreasing sequence ``a_1 > a_2 > ...``; the
    default is ``a_n = ratio^(n-1)``.  The smallest kept jump ``a_N`` is
    ``small_shell_floor``, or chosen like the series floor when ``None``.
    """

    shell_boundaries: tuple | None = None
    small_shell_floor: float | None = None
    ratio: float = 0.5
    tol: float = 1e-6
    compensate: bool = True

    def __post_init__(self):
        if self.shell_boundaries is not None:
            b = np.asarray(self.shell_boundaries, dtype=float)
            if b.ndim != 1 or b.size == 0 or np.any(b <= 0) or np.any(np.diff(b) >= 0):
                raise ValueError("shell_boundaries must be positive and strictly decreasing")
        if self.small_shell_floor is not None and not self.small_shell_floor > 0:
            raise ValueError("small_shell_floor must be positive")
        if not 0 < self.ratio < 1:
            raise ValueError("ratio must lie in (0, 1)")


@dataclass
class RatioBatch:
    """Replicates of (T_t, R_t, V_t) with truncation metadata.

    ``log_v`` keeps V on the log scale; ``v_values`` may underflow to 0 for
    tails whose jumps are below double range.
    """

    t: float
    n: int
    ratios: np.ndarray
    rt_values: np.ndarray
    log_v: np.ndarray
    discarded_mass_bound: float
    relative_residual: float
    engine: str
    seed: int
    terms: np.ndarray
    zero_v: np.ndarray
    backend: str
    config: dict = field(default_factory=dict)

    @property
    def v_values(self) -> np.ndarray:
        with np.errstate(under="ignore"):
            return np.exp(self.log_v)

    @property
    def n_zero_v(self) -> int:
        return int(self.zero_v.sum())

    def mean_se(self, values=None):
        x = self.ratios if values is None else values
        return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else math.nan

    def sidecar(self) -> dict:
        return {
            "t": self.t,
            "n": self.n,
            "engine": self.engine,
            "backend": self.backend,
            "seed": self.seed,
            "discarded_mass_bound": self.discarded_mass_bound,
            "relative_residual": self.relative_residual,
            "replicates_with_zero_v": self.n_zero_v,
            "mean_terms": float(np.mean(self.terms)),
            "config": self.config,
        }

    def to_csv(self, path):
        v = self.v_values
        with open(path, "w") as fh:
            fh.write("replicate,T,R,V\n")
            for i in range(self.n):
                fh.write(f"{i},{self.ratios[i]:.17g},{self.rt_values[i]:.17g},{v[i]:.17g}\n")

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.sidecar(), fh, indent=2, sort_keys=True)
            fh.write("\n")


@dataclass(frozen=True)
class DominanceEstimate:
    estimate: float
    ci_low: float
    ci_high: float
    n: int
    t: float
    eps: float


# ---------------------------------------------------------------------------
# truncation


def _typical_arrival(measure: LevyMeasure, t: float) -> float:
    return min(1.0 / t, 0.5 * measure.tail_zero_limit())


def _log_residual(measure, t, z, compensate):
    """Log of the residual error left by cutting the clock at ``z`` (vectorized)."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if compensate:
        return 0.5 * (math.log(t) + measure.log_tail_sq_integral_fast(z))
    return math.log(t) + measure.log_tail_integral_fast(z)


def cut_for_first_arrival(measure: LevyMeasure, t: float, log_z1, tol: float,
                          compensate: bool = True) -> np.ndarray:
    """Log clock cut ``log z*`` whose residual is ``tol * φ(z1)``, for each ``log z1``.

    The residual is decreasing in the cut, so this is a vectorized bisection
    in ``log z`` after a doubling search for an upper bracket.
    """
    lz1 = np.atleast_1d(np.asarray(log_z1, dtype=float))
    target = math.log(tol) + measure.log_phi_fast(np.exp(lz1))
    lo = lz1.copy()
    hi = lz1 + 1.0
    done = lo.copy()
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for _ in range(64):
            bad = _log_residual(measure, t, np.exp(hi), compensate) > target
            if not np.any(bad):
                break
            lo = np.where(bad, hi, lo)
            hi = np.where(bad, hi + 2.0 * (hi - done), hi)
            if np.any(hi > 745.0):
                raise TruncationBudgetError("no clock cut reaches the requested tolerance")
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            above = _log_residual(measure, t, np.exp(mid), compensate) > target
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
            if np.all(hi - lo < 1e-10):
                break
    ok = _log_residual(measure, t, np.exp(lz1), compensate) <= target
    return np.where(ok, lz1, hi)


@dataclass(frozen=True)
class Truncation:
    """Where the series is cut.

    ``mode`` is ``"fixed"`` (clock cut ``s_star = tail(eps)``), ``"exact"``
    (finite measure, every jump simulated) or ``"adaptive"`` (the cut of each
    replicate depends on its first arrival through the table).
    """

    mode: str
    s_star: float
    eps: float
    table_log_z1: np.ndarray = field(default_factory=lambda: np.zeros(0))
    table_log_cut: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def kernel_cut(self):
        return (self.s_star, self.table_log_z1, self.table_log_cut)

    def describe(self) -> dict:
        def fin(v):
            return float(v) if np.isfinite(v) else None

        d = {"mode": self.mode, "s_star": fin(self.s_star), "eps": fin(self.eps)}
        if self.mode == "adaptive":
            d["table_points"] = int(self.table_log_z1.size)
        return d


def series_truncation(measure: LevyMeasure, t: float, cfg: "SeriesConfig") -> Truncation:
    if cfg.jump_floor_eps is not None:
        eps = float(cfg.jump_floor_eps)
        return Truncation("fixed", float(measure.tail(eps)), eps)
    if not measure.tail_at_zero_infinite:
        return Truncation("exact", math.inf, 0.0)
    lz0 = math.log(_typical_arrival(measure, t))
    grid = np.arange(lz0 - 30.0, lz0 + 8.0 + 1e-9, 0.1)
    cuts = cut_for_first_arrival(measure, t, grid, cfg.tol, cfg.compensate)
    cuts = np.maximum.accumulate(cuts)
    return Truncation("adaptive", math.inf, math.nan, grid, cuts)


def resolve_truncation(measure: LevyMeasure, t: float, eps: float | None, tol: float,
                       compensate: bool = True) -> tuple[float, float]:
    """Return a fixed ``(s_star, eps)``: clock cut and the matching jump floor.

    With ``eps`` given, ``s_star = tail(eps)``.  Otherwise finite measures
    are simulated exactly (``s_star = inf``) and infinite ones get the cut
    whose residual is ``tol * φ(z0)`` at the typical first arrival
    ``z0 = min(1/t, tail(0+)/2)``.
    """
    if eps is not None:
        return float(measure.tail(eps)), float(eps)
    if not measure.tail_at_zero_infinite:
        return math.inf, 0.0
    z0 = _typical_arrival(measure, t)
    lz = float(cut_for_first_arrival(measure, t, [math.log(z0)], tol, compensate)[0])
    z = math.exp(lz)
    return z, float(measure.tail_inverse(z))


def shell_boundaries(measure: LevyMeasure, s_star: float, cfg: ShellConfig) -> np.ndarray:
    """Clock boundaries ``0 = σ_0 < σ_1 < ... < σ_N`` with ``σ_n = tail(a_n)``."""
    total = measure.tail_zero_limit()
    cap = min(s_star, total)
    if cfg.shell_boundaries is not None:
        a = np.asarray(cfg.shell_boundaries, dtype=float)
    else:
        a = cfg.ratio ** np.arange(0, 2000)
        a = a[a > 1e-300]
    sig = np.asarray(measure.tail(a), dtype=float)
    sig = sig[sig < cap]
    sig = np.concatenate(([0.0], sig, [cap]))
    sig = np.maximum.accumulate(sig)
    keep = np.concatenate(([True], np.diff(sig) > 0))
    return sig[keep]


# ---------------------------------------------------------------------------
# partitions and backends


def _partitions(n: int, seed: int):
    n_parts = max(1, -(-n // PARTITION_SIZE))
    bounds = np.minimum(np.arange(n_parts + 1) * PARTITION_SIZE, n).astype(np.int64)
    children = np.random.SeedSequence(seed).spawn(n_parts)
    return bounds, children


def _run(engine, backend, jobs, n, seed, *args):
    bounds, children = _partitions(n, seed)
    rngs = [np.random.default_rng(c) for c in children]
    fn = {
        ("series", "numba"): kernels.series_numba,
        ("series", "numpy"): kernels.series_numpy,
        ("layered", "numba"): kernels.layered_numba,
        ("layered", "numpy"): kernels.layered_numpy,
    }[engine, backend]
    if jobs and jobs > 1 and len(rngs) > 1:
        with ThreadPoolExecutor(min(jobs, len(rngs))) as pool:
            return fn(*args, rngs, bounds, pool)
    return fn(*args, rngs, bounds)


def _finish(measure, weights, t, head, sv, su, sq, zc, compensate):
    """Combine realized sums (in units of ``exp(head)``) with the remainder mean."""
    ex = weights.mean
    with np.errstate(divide="ignore", over="ignore", invalid="ignore", under="ignore"):
        finite_z = np.isfinite(zc)
        l1 = np.full(zc.shape, -np.inf)
        l2 = np.full(zc.shape, -np.inf)
        if np.any(finite_z):
            l1[finite_z] = measure.log_tail_integral_fast(zc[finite_z])
            l2[finite_z] = measure.log_tail_sq_integral_fast(zc[finite_z])
        empty = ~np.isfinite(head)
        # replicates without realized terms are expressed in units of the remainder
        ref = np.where(empty, math.log(t) + l1, head)
        ref = np.where(np.isfinite(ref), ref, 0.0)
        c1 = np.exp(math.log(t) + l1 - ref)
        c2 = np.exp(math.log(t) + l2 - 2.0 * ref)
        if compensate:
            v = sv + c1
            u = su + ex * c1
            q = sq + c2
            resid = np.sqrt(c2)
        else:
            v, u, q = sv, su, sq
            resid = c1
        zero = v <= 0
        vs = np.where(zero, 1.0, v)
        T = np.where(zero, 0.0, u / vs)
        R = np.where(zero, 0.0, q / vs**2)
        log_v = np.where(zero, -np.inf, ref + np.log(vs))
        rel = np.where(zero, np.inf, resid / vs)
        discarded = np.exp(math.log(t) + l1)
    return T, R, log_v, zero, rel, discarded


def ratio_batch(t: float, measure: LevyMeasure, weights: WeightLaw, n: int,
                engine: str = "series", cfg=None, seed: int = 0,
                backend: str | None = None, jobs: int | None = None) -> RatioBatch:
    """``n`` independent replicates of ``(T_t, R_t, V_t)``.

    Deterministic in ``(seed, cfg, backend)`` and independent of ``jobs``.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if not n >= 1:
        raise ValueError("n must be at least 1")
    backend = resolve_backend(backend)
    mspec = measure.kernel_spec()
    wspec = weights.kernel_spec()
    if engine == "series":
        cfg = cfg or SeriesConfig()
        trunc = series_truncation(measure, t, cfg)
        log_rel = math.log(cfg.rel_floor) if cfg.rel_floor > 0 else -np.inf
        head, sv, su, sq, zc, nterms, stop = _run(
            "series", backend, jobs, n, seed, mspec, wspec, t, trunc.kernel_cut(), log_rel,
            cfg.max_terms)
        T, R, log_v, zero, rel, disc = _finish(measure, weights, t, head, sv, su, sq, zc, cfg.compensate)
        hit = stop == kernels.STOP_MAX
        if np.any(hit) and np.any(rel[hit] > cfg.relative_mass_budget):
            raise TruncationBudgetError(
                f"max_terms={cfg.max_terms} reached with residual share "
                f"{float(np.max(rel[hit])):.3g} > budget {cfg.relative_mass_budget}")
        conf = {**asdict(cfg), "truncation": trunc.describe()}
    elif engine == "layered":
        cfg = cfg or ShellConfig()
        if cfg.small_shell_floor is not None:
            s_star, eps = float(measure.tail(cfg.small_shell_floor)), cfg.small_shell_floor
        else:
            s_star, eps = resolve_truncation(measure, t, None, cfg.tol, cfg.compensate)
        sigma = shell_boundaries(measure, s_star, cfg)
        head, sv, su, sq, nterms = _run("layered", backend, jobs, n, seed, mspec, wspec, t, sigma)
        zc = np.full(n, sigma[-1] if s_star < math.inf else math.inf)
        T, R, log_v, zero, rel, disc = _finish(measure, weights, t, head, sv, su, sq, zc, cfg.compensate)
        conf = {**asdict(cfg), "s_star": s_star if s_star < math.inf else None, "eps": eps,
                "n_shells": int(sigma.size - 1)}
    else:
        raise ValueError(f"unknown engine {engine!r}")
    conf = {k: (list(v) if isinstance(v, tuple) else v) for k, v in conf.items()}
    conf["measure"] = measure.describe()
    conf["weights"] = weights.describe()
    finite_rel = rel[np.isfinite(rel)]
    return RatioBatch(
        t=float(t), n=int(n), ratios=T, rt_values=R, log_v=log_v,
        discarded_mass_bound=float(np.mean(disc)),
        relative_residual=float(np.mean(finite_rel)) if finite_rel.size else math.inf,
        engine=engine, seed=int(seed), terms=np.asarray(nterms), zero_v=zero,
        backend=backend, config=conf,
    )


def rt_batch(t, measure, weights, n, seed=0, **kw) -> np.ndarray:
    """Monte Carlo draws of ``R_t``."""
    return ratio_batch(t, measure, weights, n, seed=seed, **kw).rt_values


# ---------------------------------------------------------------------------
# single replicates


def series_sample_uv(t: float, measure: LevyMeasure, weights: WeightLaw,
                     cfg: SeriesConfig | None, rng: np.random.Generator):
    """One draw of ``(U, V, terms, discarded_bound)`` from the series construction.

    No compensation is applied here: U and V are the raw truncated sums and
    ``discarded_bound = t ∫_{z}^∞ φ`` is the conditional mean of what was left out.
    """
    cfg = cfg or SeriesConfig()
    trunc = series_truncation(measure, t, cfg)
    log_rel = math.log(cfg.rel_floor) if cfg.rel_floor > 0 else -np.inf
    head, sv, su, sq, zc, nterms, _ = kernels._series_block_numpy(
        measure.kernel_spec(), weights.kernel_spec(), t, trunc.kernel_cut(), log_rel,
        cfg.max_terms, rng, 1)
    scale = math.exp(head[0]) if np.isfinite(head[0]) else 0.0
    disc = 0.0
    if np.isfinite(zc[0]):
        disc = t * math.exp(float(measure.log_tail_integral_fast(zc[:1])[0]))
    return float(su[0] * scale), float(sv[0] * scale), int(nterms[0]), disc


def layered_sample_uv(t: float, measure: LevyMeasure, weights: WeightLaw,
                      cfg: ShellConfig | None, rng: np.random.Generator):
    """One draw of ``(U, V)`` from the shell construction (no compensation)."""
    cfg = cfg or ShellConfig()
    if cfg.small_shell_floor is not None:
        s_star = float(measure.tail(cfg.small_shell_floor))
    else:
        s_star, _ = resolve_truncation(measure, t, None, cfg.tol, cfg.compensate)
    sigma = shell_boundaries(measure, s_star, cfg)
    lmax, sv, su, _, _ = kernels._layered_block_numpy(
        measure.kernel_spec(), weights.kernel_spec(), t, sigma, rng, 1)
    scale = math.exp(lmax[0]) if np.isfinite(lmax[0]) else 0.0
    return float(su[0] * scale), float(sv[0] * scale)


# ---------------------------------------------------------------------------
# big-jump dominance


def dominance_probability(t: float, measure: LevyMeasure, eps: float, n: int, seed: int = 0,
                          cfg: SeriesConfig | None = None, backend=None, jobs=None,
                          z: float = 3.0) -> DominanceEstimate:
    """Estimate ``P(largest jump / V_t > 1 - eps)`` with a Wilson interval.

    The weights play no role, so a fixed two-point law drives the kernel.
    """
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    from .weights import two_point

    cfg = cfg or SeriesConfig()
    backend = resolve_backend(backend)
    trunc = series_truncation(measure, t, cfg)
    log_rel = math.log(cfg.rel_floor) if cfg.rel_floor > 0 else -np.inf
    head, sv, su, sq, zc, _, _ = _run(
        "series", backend, jobs, n, seed, measure.kernel_spec(), two_point().kernel_spec(),
        t, trunc.kernel_cut(), log_rel, cfg.max_terms)
    _, _, _, zero, _, _ = _finish(measure, two_point(), t, head, sv, su, sq, zc, cfg.compensate)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        l1 = measure.log_tail_integral_fast(zc) if cfg.compensate else np.full(n, -np.inf)
        c1 = np.where(np.isfinite(head), np.exp(math.log(t) + l1 - head), 0.0)
        share = np.where(np.isfinite(head), 1.0 / (sv + c1), 0.0)
    k = int(np.sum(share > 1.0 - eps))
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return DominanceEstimate(p, max(0.0, centre - half), min(1.0, centre + half), n, t, eps)
