"""Weight laws F for the jumps: sampling, moments, fractional moments."""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special, stats

from .kernels import W_ATOMS, W_NORMAL, W_UNIFORM

__all__ = [
    "WeightKind",
    "WeightLaw",
    "WeightError",
    "two_point",
    "uniform",
    "gaussian",
    "empirical",
    "empirical_from_csv",
    "from_name",
]


class WeightError(ValueError):
    pass


class WeightKind(enum.Enum):
    TWO_POINT = "two_point"
    UNIFORM = "uniform"
    GAUSSIAN = "gaussian"
    EMPIRICAL = "empirical"


@dataclass(frozen=True, eq=False)
class WeightLaw:
    """A weight distribution, either atomic or with a density.

    Atomic laws (two-point, empirical) keep sorted ``atoms`` and ``probs``.
    Continuous laws keep their parameters and use scipy for the cdf and
    density.  Nondegeneracy is enforced unless ``allow_degenerate`` is set,
    which only exists so sampler tests can use a constant weight.
    """

    kind: WeightKind
    params: dict = field(default_factory=dict)
    atoms: np.ndarray | None = None
    probs: np.ndarray | None = None
    allow_degenerate: bool = False

    def __post_init__(self):
        if self.atoms is not None:
            a = np.asarray(self.atoms, dtype=float)
            pr = np.asarray(self.probs, dtype=float)
            if a.shape != pr.shape or a.ndim != 1 or a.size == 0:
                raise WeightError("atoms and probs must be matching 1-d arrays")
            if np.any(pr < 0) or abs(pr.sum() - 1.0) > 1e-10:
                raise WeightError("probabilities must be nonnegative and sum to 1")
            if not np.all(np.isfinite(a)):
                raise WeightError("atoms must be finite")
            order = np.argsort(a, kind="stable")
            a, pr = a[order], pr[order]
            keep = pr > 0
            object.__setattr__(self, "atoms", a[keep])
            object.__setattr__(self, "probs", pr[keep] / pr[keep].sum())
        if not self.allow_degenerate and not self.variance > 0:
            raise WeightError("weight law is degenerate (Var(X) = 0)")

    # -- description -----------------------------------------------------------
    @property
    def is_atomic(self) -> bool:
        return self.atoms is not None

    def describe(self) -> dict:
        d = {"kind": self.kind.value, **self.params}
        if self.kind is WeightKind.EMPIRICAL:
            d["n_atoms"] = int(self.atoms.size)
        return d

    def _frozen(self):
        if self.kind is WeightKind.UNIFORM:
            a, b = self.params["a"], self.params["b"]
            return stats.uniform(loc=a, scale=b - a)
        if self.kind is WeightKind.GAUSSIAN:
            return stats.norm(loc=self.params["mu"], scale=self.params["sigma"])
        raise AssertionError

    # -- moments ---------------------------------------------------------------
    @property
    def mean(self) -> float:
        if self.is_atomic:
            return float(np.dot(self.atoms, self.probs))
        if self.kind is WeightKind.UNIFORM:
            return 0.5 * (self.params["a"] + self.params["b"])
        return float(self.params["mu"])

    @property
    def second_moment(self) -> float:
        if self.is_atomic:
            return float(np.dot(self.atoms**2, self.probs))
        return self.variance + self.mean**2

    @property
    def variance(self) -> float:
        if self.is_atomic:
            m = np.dot(self.atoms, self.probs)
            return float(np.dot((self.atoms - m) ** 2, self.probs))
        if self.kind is WeightKind.UNIFORM:
            return (self.params["b"] - self.params["a"]) ** 2 / 12.0
        return float(self.params["sigma"]) ** 2

    @property
    def abs_mean(self) -> float:
        return self.p_moment(1.0)

    def p_moment(self, p: float) -> float:
        """``E|X|^p`` for ``p > 0``."""
        if not p > 0:
            raise WeightError("p must be positive")
        if self.is_atomic:
            return float(np.dot(np.abs(self.atoms) ** p, self.probs))
        if self.kind is WeightKind.GAUSSIAN and self.params["mu"] == 0.0:
            s = self.params["sigma"]
            return s**p * 2 ** (p / 2) * special.gamma((p + 1) / 2) / math.sqrt(math.pi)
        return self._quad_abs_power(p)

    def _quad_abs_power(self, p):
        dist = self._frozen()
        lo, hi = dist.support()
        f = lambda u: abs(u) ** p * dist.pdf(u)  # noqa: E731
        if lo < 0 < hi:
            # split at the kink; quad cannot combine break points with infinite ends
            return integrate.quad(f, lo, 0.0, limit=200)[0] + integrate.quad(f, 0.0, hi, limit=200)[0]
        return integrate.quad(f, lo, hi, limit=200)[0]

    # -- distribution functions -------------------------------------------------
    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_atomic:
            cum = np.concatenate(([0.0], np.cumsum(self.probs)))
            out = cum[np.searchsorted(self.atoms, x, side="right")]
            out = np.minimum(out, 1.0)
        else:
            out = self._frozen().cdf(x)
        return out if out.ndim else float(out)

    def cdf_left(self, x):
        """``P(X < x)``."""
        if not self.is_atomic:
            return self.cdf(x)
        x = np.asarray(x, dtype=float)
        cum = np.concatenate(([0.0], np.cumsum(self.probs)))
        out = np.minimum(cum[np.searchsorted(self.atoms, x, side="left")], 1.0)
        return out if out.ndim else float(out)

    def pdf(self, x):
        if self.is_atomic:
            raise WeightError("atomic law has no density")
        return self._frozen().pdf(x)

    # -- sampling ----------------------------------------------------------------
    def sample(self, rng: np.random.Generator, size=None):
        """I.i.d. draws from F using a caller-owned generator."""
        if self.is_atomic:
            return self.atoms[np.minimum(
                np.searchsorted(np.cumsum(self.probs), rng.random(size), side="right"),
                self.atoms.size - 1)]
        if self.kind is WeightKind.UNIFORM:
            return rng.uniform(self.params["a"], self.params["b"], size)
        return rng.normal(self.params["mu"], self.params["sigma"], size)

    def kernel_spec(self):
        if self.is_atomic:
            cum = np.cumsum(self.probs)
            cum[-1] = 1.0
            return W_ATOMS, np.zeros(0), self.atoms.copy(), cum
        if self.kind is WeightKind.UNIFORM:
            return W_UNIFORM, np.array([self.params["a"], self.params["b"]]), np.zeros(0), np.zeros(0)
        return W_NORMAL, np.array([self.params["mu"], self.params["sigma"]]), np.zeros(0), np.zeros(0)

    # -- fractional moments --------------------------------------------------------
    def frac_moment_pair(self, x: float, beta: float) -> tuple[float, float]:
        """``(∫|u-x|^β F(du), ∫|u-x|^β sgn(x-u) F(du))`` with ``sgn(0) = 0``.

        ``beta`` may lie in ``(-1, 1)`` for laws with a density (negative
        powers are used by the limit density); atomic laws need ``beta > 0``.
        """
        if self.is_atomic:
            if not 0 < beta < 1:
                raise WeightError("atomic frac moments need 0 < beta < 1")
            d = x - self.atoms
            w = np.abs(d) ** beta * self.probs
            return float(w.sum()), float(np.dot(np.sign(d), w))
        if not -1 < beta < 1:
            raise WeightError("beta must lie in (-1, 1)")
        if self.kind in (WeightKind.GAUSSIAN, WeightKind.UNIFORM):
            m, s = self._frac_closed(np.asarray(float(x)), float(beta))
            return float(m), float(s)
        return self._frac_quad(float(x), float(beta))

    def frac_moment_pair_vec(self, x, beta: float):
        """Vectorized :meth:`frac_moment_pair` over an array of ``x``."""
        x = np.asarray(x, dtype=float)
        if self.is_atomic:
            if not 0 < beta < 1:
                raise WeightError("atomic frac moments need 0 < beta < 1")
            d = x[..., None] - self.atoms
            w = np.abs(d) ** beta * self.probs
            return w.sum(-1), (np.sign(d) * w).sum(-1)
        if not -1 < beta < 1:
            raise WeightError("beta must lie in (-1, 1)")
        if self.kind in (WeightKind.GAUSSIAN, WeightKind.UNIFORM):
            return self._frac_closed(x, float(beta))
        out = np.array([self.frac_moment_pair(v, beta) for v in x.ravel()])
        return out[:, 0].reshape(x.shape), out[:, 1].reshape(x.shape)

    def _frac_closed(self, x, beta):
        """Exact pair for the uniform and Gaussian laws."""
        if self.kind is WeightKind.UNIFORM:
            a, b = self.params["a"], self.params["b"]
            k = beta + 1.0
            left = (np.maximum(x - a, 0.0) ** k - np.maximum(x - b, 0.0) ** k) / (k * (b - a))
            right = (np.maximum(b - x, 0.0) ** k - np.maximum(a - x, 0.0) ** k) / (k * (b - a))
            return left + right, left - right
        # x - X ~ N(m, 1) after scaling by sigma; Kummer-function moments of a shifted normal
        sig = self.params["sigma"]
        m = (x - self.params["mu"]) / sig
        z = -0.5 * m * m
        c = sig**beta / math.sqrt(math.pi)
        mabs = c * 2 ** (beta / 2) * special.gamma((beta + 1) / 2) * special.hyp1f1(-beta / 2, 0.5, z)
        sgn = c * m * 2 ** ((beta + 1) / 2) * special.gamma(beta / 2 + 1) * special.hyp1f1((1 - beta) / 2, 1.5, z)
        return mabs, sgn

    def _frac_quad(self, x, beta):
        dist = self._frozen()
        lo, hi = dist.support()
        pdf = dist.pdf

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            a = b = 0.0
            ea = eb = 0.0
            if x > lo:
                a, ea = _half_quad(lambda v: pdf(x - v), x - lo, beta)
            if x < hi:
                b, eb = _half_quad(lambda v: pdf(x + v), hi - x, beta)
        if not (np.isfinite(a) and np.isfinite(b)) or max(ea, eb) > 1e-8 * max(a + b, 1e-300):
            raise WeightError(f"fractional-moment quadrature failed at x={x}, beta={beta}")
        return a + b, a - b


def _half_quad(g, length, beta):
    """``∫_0^length v^beta g(v) dv``; the power at 0 goes to an algebraic-weight rule."""
    opts = dict(limit=400, epsabs=1e-14, epsrel=1e-12)
    head = min(length, 1.0)
    a, ea = integrate.quad(g, 0.0, head, weight="alg", wvar=(beta, 0.0), **opts)
    if length <= 1.0:
        return a, ea
    b, eb = integrate.quad(lambda v: v**beta * g(v), 1.0, length, **opts)
    return a + b, ea + eb


def two_point(a: float = 0.0, b: float = 1.0, p: float = 0.5, allow_degenerate: bool = False) -> WeightLaw:
    """``P(X = b) = p``, ``P(X = a) = 1 - p``."""
    if not 0 <= p <= 1:
        raise WeightError("p must lie in [0, 1]")
    return WeightLaw(WeightKind.TWO_POINT, {"a": float(a), "b": float(b), "p": float(p)},
                     atoms=np.array([a, b], dtype=float), probs=np.array([1 - p, p]),
                     allow_degenerate=allow_degenerate)


def uniform(a: float = 0.0, b: float = 1.0) -> WeightLaw:
    if not b > a:
        raise WeightError("uniform needs b > a")
    return WeightLaw(WeightKind.UNIFORM, {"a": float(a), "b": float(b)})


def gaussian(mu: float = 0.0, sigma: float = 1.0) -> WeightLaw:
    if not sigma > 0:
        raise WeightError("gaussian needs sigma > 0")
    return WeightLaw(WeightKind.GAUSSIAN, {"mu": float(mu), "sigma": float(sigma)})


def empirical(values, allow_degenerate: bool = False) -> WeightLaw:
    """Uniform probabilities on the given values (ties merged)."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise WeightError("empirical law needs at least one value")
    u, counts = np.unique(v, return_counts=True)
    return WeightLaw(WeightKind.EMPIRICAL, {}, atoms=u, probs=counts / v.size,
                     allow_degenerate=allow_degenerate)


def empirical_from_csv(path) -> WeightLaw:
    vals = []
    with open(path) as fh:
        for line in fh:
            line = line.strip().split(",")[0].strip()
            if not line or line.startswith("#"):
                continue
            try:
                vals.append(float(line))
            except ValueError:
                if vals:
                    raise WeightError(f"bad value in {path}: {line!r}")
    return empirical(vals)


_BUILTINS = {
    "two_point": two_point,
    "twopoint": two_point,
    "uniform": uniform,
    "gaussian": gaussian,
    "normal": gaussian,
}


def from_name(name: str, **params) -> WeightLaw:
    key = name.strip().lower().replace("-", "_")
    if key not in _BUILTINS:
        raise WeightError(f"unknown weight law {name!r}; choose from {sorted(_BUILTINS)} or empirical")
    return _BUILTINS[key](**params)
