"""Limit laws of T_t and the moment identities attached to them.

For a tail that is regularly varying with index ``-beta``, ``0 < beta < 1``,
T_t converges to a law with cdf

    1/2 + (1/(pi beta)) arctan( s(x)/m(x) * tan(pi beta / 2) ),

where ``(m, s)`` is the fractional moment pair of the weight law at ``x``.
``beta = 0`` gives the weight law itself and ``beta = 1`` the point mass at
``EX``.  The same cdf is also available by Fourier inversion of the
two-dimensional stable characteristic function of (U, V).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .levy_measure import LevyMeasure, StablePositive
from .weights import WeightLaw

__all__ = [
    "LimitLaw",
    "LimitError",
    "ConditionWarning",
    "limit_cdf",
    "limit_density",
    "arcsine_density",
    "arcsine_cdf",
    "lamperti_density",
    "stable_cexp",
    "fourier_cdf",
    "expected_rt",
    "limit_second_moment",
]


class LimitError(ValueError):
    pass


class ConditionWarning(UserWarning):
    """A result was computed outside the regime where its identity is known to hold."""


@dataclass(frozen=True, eq=False)
class LimitLaw:
    """Limit of T_t: index ``beta`` in [0, 1], weight law ``F`` and a scale ``c``.

    ``scale_c`` multiplies the stable exponent of (U, V).  It has no effect on
    the ratio law and exists so that invariance can be checked.
    """

    beta: float
    F: WeightLaw
    scale_c: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise LimitError("beta must lie in [0, 1]")
        if not self.scale_c > 0:
            raise LimitError("scale_c must be positive")

    @property
    def tau(self) -> float:
        return math.tan(0.5 * math.pi * self.beta)

    def cdf(self, x):
        return limit_cdf(x, self)

    def density(self, x):
        return limit_density(x, self)

    def second_moment(self) -> float:
        return limit_second_moment(self)

    def describe(self) -> dict:
        return {"beta": self.beta, "F": self.F.describe(), "scale_c": self.scale_c}


def _scalar_or_array(out, x):
    return float(out) if np.ndim(x) == 0 else out


# ---------------------------------------------------------------------------
# closed forms


def limit_cdf(x, law: LimitLaw):
    """Cdf of the limit law, vectorized over ``x``."""
    xa = np.asarray(x, dtype=float)
    b = law.beta
    if b == 0.0:
        out = np.asarray(law.F.cdf(xa), dtype=float)
    elif b == 1.0:
        out = (xa >= law.F.mean).astype(float)
    else:
        m, s = law.F.frac_moment_pair_vec(xa, b)
        if np.any(m <= 0):
            raise LimitError("fractional moment m(x) vanished; weight law is degenerate")
        out = 0.5 + np.arctan(s / m * law.tau) / (math.pi * b)
        out = np.clip(out, 0.0, 1.0)
    return _scalar_or_array(out, x)


def _neg_pair(F: WeightLaw, x, beta):
    """``(∫|x-u|^(beta-1) F(du), ∫|x-u|^(beta-1) sgn(x-u) F(du))``."""
    if F.is_atomic:
        d = x[..., None] - F.atoms
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.abs(d) ** (beta - 1.0) * F.probs
            return w.sum(-1), (np.sign(d) * w).sum(-1)
    return F.frac_moment_pair_vec(x, beta - 1.0)


def limit_density(x, law: LimitLaw):
    """Density of the limit law for ``0 < beta < 1`` (infinite at atoms of F)."""
    b = law.beta
    if not 0.0 < b < 1.0:
        raise LimitError("the limit law has a density only for 0 < beta < 1")
    xa = np.asarray(x, dtype=float)
    m, s = law.F.frac_moment_pair_vec(xa, b)
    A, B = _neg_pair(law.F, xa, b)
    tau = law.tau
    with np.errstate(invalid="ignore"):
        out = tau / math.pi * (A * m - B * s) / (m * m + tau * tau * s * s)
    out = np.where(np.isnan(out), np.inf, out)
    return _scalar_or_array(out, x)


def arcsine_density(x):
    """``1 / (pi sqrt(x (1 - x)))`` on (0, 1)."""
    xa = np.asarray(x, dtype=float)
    if np.any((xa <= 0) | (xa >= 1)):
        raise LimitError("arcsine density is defined on (0, 1)")
    return _scalar_or_array(1.0 / (math.pi * np.sqrt(xa * (1.0 - xa))), x)


def arcsine_cdf(x):
    """``(2/pi) arcsin(sqrt(x))`` clipped to [0, 1]."""
    xa = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return _scalar_or_array(2.0 / math.pi * np.arcsin(np.sqrt(xa)), x)


def lamperti_density(x, beta: float, p: float):
    """Density of the generalized arcsine (Lamperti) law with index ``beta`` and weight ``p``."""
    if not (0 < beta < 1 and 0 < p < 1):
        raise LimitError("lamperti_density needs 0 < beta < 1 and 0 < p < 1")
    xa = np.asarray(x, dtype=float)
    if np.any((xa <= 0) | (xa >= 1)):
        raise LimitError("lamperti density is defined on (0, 1)")
    q = 1.0 - p
    xb, yb = xa**beta, (1.0 - xa) ** beta
    num = math.sin(math.pi * beta) / math.pi * p * q * xa ** (beta - 1) * (1.0 - xa) ** (beta - 1)
    den = p * p * yb * yb + q * q * xb * xb + 2.0 * p * q * xb * yb * math.cos(math.pi * beta)
    return _scalar_or_array(num / den, x)


def limit_second_moment(law: LimitLaw) -> float:
    """``(EX)^2 + Var(X)(1 - beta)``."""
    F = law.F
    ex2 = F.second_moment
    if not math.isfinite(ex2):
        raise LimitError("weight law has no finite second moment")
    return F.mean**2 + F.variance * (1.0 - law.beta)


# ---------------------------------------------------------------------------
# Fourier route


def stable_cexp(theta1: float, theta2: float, law: LimitLaw) -> complex:
    """Log characteristic function of (U, V) at ``(theta1, theta2)``.

    Equals ``-c ∫ |theta1 u + theta2|^beta (1 - i sgn(theta1 u + theta2) tan(pi beta/2)) F(du)``.
    """
    b = law.beta
    if not 0.0 < b < 1.0:
        raise LimitError("stable_cexp needs 0 < beta < 1")
    c, tau = law.scale_c, law.tau
    if theta1 == 0.0:
        if theta2 == 0.0:
            return 0j
        return complex(-c * abs(theta2) ** b, c * abs(theta2) ** b * math.copysign(tau, theta2))
    # |t1 u + t2| = |t1| |u - x| and sgn(t1 u + t2) = -sgn(t1) sgn(x - u) with x = -t2/t1
    x = -theta2 / theta1
    m, s = law.F.frac_moment_pair(x, b)
    k = c * abs(theta1) ** b
    return complex(-k * m, -k * math.copysign(1.0, theta1) * tau * s)


def fourier_cdf(x: float, law: LimitLaw, rtol: float = 1e-12, panel: float = 1.0):
    """Cdf of U/V at ``x`` by Fourier inversion; returns ``(value, error_estimate)``.

    Evaluates ``1/2 - (1/pi) ∫_0^∞ Im Ψ(u, -ux) / u du`` in the variable
    ``log u``.  Panels start at the decay scale ``(c m)^(-1/beta)`` and are
    added in both directions until ``|Ψ|`` is below ``1e-12`` on the right
    and the integrand is below ``rtol`` on the left.
    """
    b = law.beta
    if not 0.0 < b < 1.0:
        raise LimitError("fourier_cdf needs 0 < beta < 1")
    x = float(x)
    m, s = law.F.frac_moment_pair(x, b)
    if not m > 0:
        raise LimitError("fractional moment m(x) vanished")
    c, tau = law.scale_c, law.tau
    v0 = -math.log(c * m) / b

    def g(v):
        # u Im Ψ(u, -ux) / u in log u
        w = c * math.exp(b * v)
        return -math.exp(-w * m) * math.sin(w * tau * s)

    total = 0.0
    err = 0.0
    opts = dict(epsabs=1e-15, epsrel=1e-13, limit=200)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            # right: until |Ψ| = exp(-c m u^beta) < 1e-12
            k = 0
            while True:
                a = v0 + k * panel
                val, e = integrate.quad(g, a, a + panel, **opts)
                total += val
                err += e
                k += 1
                if math.exp(-c * m * math.exp(b * a)) < 1e-12:
                    break
                if k > 10_000:
                    raise LimitError("fourier_cdf: right tail did not decay")
            # left: integrand ~ c u^beta tau |s| decays geometrically
            k = 0
            while True:
                a = v0 - (k + 1) * panel
                val, e = integrate.quad(g, a, a + panel, **opts)
                total += val
                err += e
                k += 1
                if c * math.exp(b * (a + panel)) * tau * max(abs(s), m) < rtol * b:
                    break
                if k > 10_000:
                    raise LimitError("fourier_cdf: left tail did not decay")
        except integrate.IntegrationWarning as exc:
            raise LimitError(f"fourier_cdf quadrature did not converge at x={x}: {exc}") from exc
    return 0.5 - total / math.pi, err / math.pi


# ---------------------------------------------------------------------------
# E R_t


def expected_rt(t: float, measure: LevyMeasure, check: bool = True, step: float = 0.05) -> float:
    """``E R_t = ∫_0^∞ -t u Φ''(u) exp(-t Φ(u)) du``.

    Integrated in ``v = log u`` by the trapezoid rule on a window around the
    point where ``t Φ(u) = 1``; the window grows until the integrand at both
    ends is below 1e-12 of its peak.  With ``check`` set, a :class:`ConditionWarning` is
    issued when ``x tail(x) / I(x)`` looks like it tends to 0 at the end
    that governs ``t``, since the identity ``E R_t -> 1 - beta`` is only
    established when that ratio stays away from 0.
    """
    if not t > 0:
        raise LimitError("t must be positive")
    if check:
        _check_inf_condition(measure, t)

    def t_phi(v):
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            return t * float(measure.laplace_exponent_vec(np.array([math.exp(v)]))[0][0])

    # locate t Φ(u) = 1 in v = log u by bisection (Φ is increasing)
    lo, hi = -600.0, 600.0
    if t_phi(hi) >= 1.0:
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if t_phi(mid) < 1.0 else (lo, mid)
            if hi - lo < 0.25:
                break
        v0 = hi
    elif measure.tail_at_zero_infinite:
        # slowly growing Φ: the integrand lives beyond double range
        raise LimitError(f"t Φ(u) stays below 1 for u up to e^600 at t={t:g}; E R_t is out of range")
    else:
        # finite measure with small t: center on the typical jump size
        v0 = -math.log(measure.tail_inverse(0.5 * measure.tail_zero_limit()))

    lo, hi = v0 - 40.0, v0 + 10.0
    for _ in range(20):
        v = np.arange(lo, hi + step / 2, step)
        u = np.exp(v)
        ph, _, d2 = measure.laplace_exponent_vec(u)
        f = -t * (u * d2) * u * np.exp(-t * ph)
        if not np.all(np.isfinite(f)):
            raise LimitError("E R_t integrand is not finite")
        peak = max(float(np.max(np.abs(f))), 1e-300)
        # Φ'' carries absolute noise of order 1e-16 t Φ, so decay is judged at 1e-12
        grow_lo = abs(f[0]) > 1e-12 * peak
        grow_hi = abs(f[-1]) > 1e-12 * peak
        if not (grow_lo or grow_hi):
            break
        lo -= 20.0 * grow_lo
        hi += 20.0 * grow_hi
    else:
        raise LimitError("E R_t integrand did not decay on the search window")
    trap = getattr(np, "trapezoid", None) or np.trapz
    total = float(trap(f, dx=step))
    return min(max(total, 0.0), 1.0)


def _check_inf_condition(measure: LevyMeasure, t: float, tol: float = 0.05):
    if isinstance(measure, StablePositive):
        return
    from .diagnostics import relative_stability_scan

    end = "zero" if t <= 1.0 else "infinity"
    try:
        scan = relative_stability_scan(measure, end=end, decades=6, per_decade=8, tol=tol)
    except Exception:  # the check is advisory
        return
    if scan.flag:
        warnings.warn(
            f"x tail(x)/I(x) appears to tend to 0 toward {end}; E R_t may not follow the "
            "regular-variation identity here",
            ConditionWarning,
            stacklevel=3,
        )
