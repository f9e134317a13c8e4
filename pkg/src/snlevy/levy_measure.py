"""Lévy measures of driftless subordinators, described through their tail.

Every measure is represented by its tail function ``tail(x) = Λ(x, ∞)`` on
``(0, ∞)``.  The built-ins carry closed forms where they exist; everything
else (truncated moments, Laplace exponent, integrals of the inverse tail)
goes through quadrature in the log coordinate ``w = log x``, which turns the
integrable power singularities at zero into exponentially decaying tails.

Step tails (:class:`StepTail`, :class:`BlockOscillating`) are purely atomic
measures and override the quadrature routes with exact finite sums.
"""

from __future__ import annotations

import enum
import math
import warnings
from functools import cached_property

import numpy as np
from scipy import integrate, interpolate

__all__ = [
    "Kind",
    "LevyMeasure",
    "LevyMeasureError",
    "DivergenceError",
    "InversionError",
    "StablePositive",
    "ExpCompoundPoisson",
    "LogSlowlyVarying",
    "IndexOneLogCorrected",
    "StepTail",
    "BlockOscillating",
    "from_name",
    "from_csv",
]

_LOG_E = 1.0
_W_MIN = -700.0
_W_MAX = 700.0
_QUAD_OPTS = dict(limit=400, epsabs=0.0, epsrel=1e-11)


class LevyMeasureError(ValueError):
    pass


class DivergenceError(LevyMeasureError):
    """A truncated moment that should be finite under (VV) diverged numerically."""


class InversionError(LevyMeasureError):
    """Numeric inversion of the tail did not reach tolerance."""


class Kind(enum.Enum):
    STABLE = "stable"
    EXP_CP = "exp_cp"
    LOG_SV = "log_sv"
    INDEX_ONE = "index_one"
    BLOCK = "block"
    USER = "user"


# kernel codes shared with snlevy.kernels
KERNEL_STABLE, KERNEL_EXP, KERNEL_LOGSV, KERNEL_INDEX1, KERNEL_STEP = range(5)


def _exp(a: float) -> float:
    return math.exp(a) if a < 700.0 else math.inf


def _quad(f, a, b, floor: float = 0.0, **kw):
    """scipy quad; on a warning, accept the result if its error is below 1e-6 of max(|value|, floor)."""
    opts = dict(_QUAD_OPTS)
    opts.update(kw)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, a, b, **opts)
        except integrate.IntegrationWarning:
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(f, a, b, **opts)
            if not (np.isfinite(val) and err <= 1e-6 * max(abs(val), floor, 1e-300)):
                raise LevyMeasureError(f"quadrature failed on [{a}, {b}]: {val} ± {err}")
    return val, err


class LevyMeasure:
    """Base class: a Lévy measure on (0, ∞) given by its tail.

    Subclasses implement the tail in unit scale through ``_log_tail_unit``
    (natural log of the tail as a function of ``log x``) and may provide a
    closed-form inverse ``_phi_unit``.  ``scale`` multiplies every jump:
    the scaled tail is ``tail_unit(x / scale)``.
    """

    kind: Kind = Kind.USER
    tail_at_zero_infinite: bool = True
    support_upper: float | None = None
    has_closed_inverse: bool = False

    def __init__(self, scale: float = 1.0, validate: bool = True):
        if not scale > 0:
            raise LevyMeasureError("scale must be positive")
        self.scale = float(scale)
        self._log_scale = math.log(self.scale)
        if validate:
            self._validate()

    # -- description ---------------------------------------------------
    @property
    def params(self) -> dict:
        return {"scale": self.scale}

    def describe(self) -> dict:
        return {"kind": self.kind.value, **self.params}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({args})"

    def scaled(self, c: float) -> "LevyMeasure":
        """Same measure with every jump multiplied by ``c``."""
        p = dict(self.params)
        p["scale"] = self.scale * c
        return type(self)(**p)

    # -- unit-scale hooks ------------------------------------------------
    def _log_tail_unit(self, w):
        raise NotImplementedError

    def _phi_unit(self, s):
        return None

    # -- tail --------------------------------------------------------------
    def log_tail_at_log(self, w):
        """``log tail(exp(w))``; finite or ``-inf``."""
        w = np.asarray(w, dtype=float)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            return self._log_tail_unit(w - self._log_scale)

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise LevyMeasureError("tail is evaluated on (0, inf)")
        with np.errstate(over="ignore", divide="ignore"):
            out = np.exp(self.log_tail_at_log(np.log(x)))
        return out if out.ndim else float(out)

    def tail_zero_limit(self) -> float:
        """``tail(0+)``."""
        if self.tail_at_zero_infinite:
            return math.inf
        return float(np.exp(self.log_tail_at_log(_W_MIN)))

    # -- inverse tail --------------------------------------------------------
    @cached_property
    def _envelope(self):
        w = np.arange(_W_MIN, _W_MAX + 0.25, 0.5)
        lt = self.log_tail_at_log(w)
        # enforce monotone envelope against rounding
        lt = np.minimum.accumulate(lt)
        return w, lt

    def tail_inverse(self, s, method: str = "auto"):
        """Generalized inverse ``sup{y : tail(y) > s}`` (0 for an empty set)."""
        s_arr = np.asarray(s, dtype=float)
        if np.any(s_arr <= 0):
            raise LevyMeasureError("tail_inverse is defined for s > 0")
        if method not in ("auto", "closed", "numeric"):
            raise ValueError(method)
        if method != "numeric" and self.has_closed_inverse:
            out = self.scale * np.asarray(self._phi_unit(s_arr), dtype=float)
        elif method == "closed":
            raise LevyMeasureError(f"{type(self).__name__} has no closed-form inverse")
        else:
            out = np.vectorize(self._phi_numeric, otypes=[float])(s_arr)
        return out if out.ndim else float(out)

    def _phi_numeric(self, s: float) -> float:
        """Bisection in ``log x`` on the cached monotone envelope."""
        ls = math.log(s)
        w, lt = self._envelope
        above = lt > ls
        if not above[0]:
            if not self.tail_at_zero_infinite:
                return 0.0
            return 0.0  # below double range
        if above[-1]:
            raise InversionError(f"tail exceeds {s} beyond x=exp({_W_MAX})")
        i = int(np.argmin(above)) - 1
        lo, hi = w[i], w[i + 1]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if float(self.log_tail_at_log(mid)) > ls:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-12 * max(1.0, abs(lo)) * 0.5:
                return math.exp(lo)
        if hi - lo > 1e-12 * max(1.0, abs(lo)):
            raise InversionError(f"bisection did not converge at s={s}")
        return math.exp(lo)

    # -- truncated moments ---------------------------------------------------
    def _check_integrable_at_zero(self, upper_w: float):
        """Divergence sentinel for ``∫_0 tail(y) dy``.

        In ``w = log y`` the integrand is ``h(w) = y tail(y)``; it must decay
        as ``w → -∞``.  Slow decay that still diverges is caught by the
        quadrature failure path instead.
        """
        far = upper_w - 700.0
        probe = np.linspace(far, upper_w, 64)
        h = np.exp(probe + self.log_tail_at_log(probe))
        if not np.all(np.isfinite(h)) or h[0] > 0.5 * max(h.max(), 1e-300):
            raise DivergenceError(
                "∫_0 tail(y) dy does not converge: the measure violates ∫_0^1 y Λ(dy) < ∞"
            )

    def small_jump_mean(self, x: float) -> float:
        """``I(x) = ∫_0^x tail(y) dy``."""
        if not x > 0:
            raise LevyMeasureError("x must be positive")
        lx = math.log(x)
        self._check_integrable_at_zero(lx)

        def f(w):
            return _exp(w + float(self.log_tail_at_log(w)))

        try:
            val, _ = _quad(f, -np.inf, lx)
        except LevyMeasureError as exc:
            raise DivergenceError(f"I({x}) did not converge: {exc}") from exc
        return val

    def second_truncated_moment(self, v: float) -> float:
        """``V2(v) = ∫_(0,v] u² Λ(du) = ∫_0^v 2y (tail(y) - tail(v)) dy``."""
        if not v > 0:
            raise LevyMeasureError("v must be positive")
        lv = math.log(v)
        tv = float(np.exp(self.log_tail_at_log(lv)))

        def f(w):
            return 2.0 * (_exp(2.0 * w + float(self.log_tail_at_log(w))) - tv * _exp(2.0 * w))

        val, _ = _quad(f, -np.inf, lv)
        return max(val, 0.0)

    def laplace_exponent(self, u: float) -> tuple[float, float, float]:
        """``(Φ(u), Φ'(u), Φ''(u))`` with ``Φ(u) = ∫(1 - e^{-ux}) Λ(dx)``.

        All three come from the tail by integration by parts:
        ``Φ = u∫T e^{-uy}``, ``Φ' = ∫T (1-uy) e^{-uy}``,
        ``Φ'' = -∫T (2y - u y²) e^{-uy}``.
        """
        if not u > 0:
            raise LevyMeasureError("u must be positive")
        w0 = -math.log(u)

        def lt(w):
            return float(self.log_tail_at_log(w))

        def f0(w):
            y = _exp(w)
            return _exp(w + lt(w) - u * y)

        def f1(w):
            y = _exp(w)
            return (1.0 - u * y) * _exp(w + lt(w) - u * y)

        def f2(w):
            y = _exp(w)
            return (2.0 - u * y) * _exp(2.0 * w + lt(w) - u * y)

        hi = w0 + math.log(800.0)
        out = []
        floor = 0.0
        # f1 and f2 change sign; their error is judged against the size of the f0 integral
        for f, k in ((f0, 0.0), (f1, 1.0), (f2, 1.0 / u)):
            a, _ = _quad(f, -np.inf, w0, floor=k * floor)
            b, _ = _quad(f, w0, hi, floor=k * floor)
            out.append(a + b)
            floor = out[0]
        return u * out[0], out[1], -out[2]

    def laplace_exponent_vec(self, u, step: float = 0.1):
        """Vectorized ``(Φ, Φ', Φ'')`` over an array of ``u``.

        Uses the same integration-by-parts forms as :meth:`laplace_exponent`,
        integrated by the trapezoid rule in ``log y`` with an end correction
        at the lower cut ``y = eps``.  Below ``eps``, where ``e^{-uy} = 1``
        to double precision, the integrals are added exactly through
        ``I(eps)`` and ``V2(eps)``.
        """
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if np.any(u <= 0):
            raise LevyMeasureError("u must be positive")
        lu = np.log(u)
        w_lo = -float(lu.max()) - 40.0
        w_hi = -float(lu.min()) + math.log(800.0)
        w = np.arange(w_lo, w_hi + step, step)
        lt = np.asarray(self.log_tail_at_log(w), dtype=float)
        y = np.exp(w)
        eps = y[0]
        i_eps = self.small_jump_mean(eps)
        j_eps, _ = _quad(lambda v: 2.0 * _exp(2.0 * v + float(self.log_tail_at_log(v))), -np.inf, w[0])
        out0 = np.empty(u.size)
        out1 = np.empty(u.size)
        out2 = np.empty(u.size)
        wts = np.full(w.size, step)
        wts[0] = wts[-1] = 0.5 * step
        base = np.where(np.isfinite(lt), w + lt, -np.inf)
        for k in range(0, u.size, 256):
            uu = u[k:k + 256, None]
            uy = uu * y
            with np.errstate(under="ignore"):
                e = np.exp(base - uy)
            for out, f in ((out0, e), (out1, (1.0 - uy) * e), (out2, (2.0 - uy) * y * e)):
                # trapezoid plus the h²/12 f'(lower end) Euler-Maclaurin term
                d0 = (-3.0 * f[:, 0] + 4.0 * f[:, 1] - f[:, 2]) / (2.0 * step)
                out[k:k + 256] = f @ wts + step * step / 12.0 * d0
        return u * (out0 + i_eps), out1 + i_eps, -(out2 + j_eps)

    def tail_integral_of_inverse(self, s0: float) -> float:
        """``∫_{s0}^∞ φ(s) ds = ∫_0^{φ(s0)} (tail(y) - s0) dy``."""
        if not s0 > 0:
            raise LevyMeasureError("s0 must be positive")
        x0 = self.tail_inverse(s0)
        if x0 <= 0:
            return 0.0
        lx = math.log(x0)
        self._check_integrable_at_zero(lx)

        def f(w):
            return max(_exp(w + float(self.log_tail_at_log(w))) - s0 * _exp(w), 0.0)

        val, _ = _quad(f, -np.inf, lx)
        return val

    def tail_sq_integral_of_inverse(self, s0: float) -> float:
        """``∫_{s0}^∞ φ(s)² ds = ∫_0^{φ(s0)} 2y (tail(y) - s0) dy``."""
        if not s0 > 0:
            raise LevyMeasureError("s0 must be positive")
        x0 = self.tail_inverse(s0)
        if x0 <= 0:
            return 0.0
        lx = math.log(x0)

        def f(w):
            return 2.0 * max(_exp(2.0 * w + float(self.log_tail_at_log(w))) - s0 * _exp(2.0 * w), 0.0)

        val, _ = _quad(f, -np.inf, lx)
        return val

    # -- vectorized log-functionals used for batch compensation ----------------
    def _log_tail_int_unit(self, z):
        return None

    def _log_tail_sq_int_unit(self, z):
        return None

    @cached_property
    def _functional_table(self):
        """Spline tables of the two inverse-tail integrals in log-log coordinates."""
        lz = np.arange(-12.0, 160.0 + 1e-9, 0.25)
        l1 = np.empty_like(lz)
        l2 = np.empty_like(lz)
        unit = type(self)(**{**self.params, "scale": 1.0})
        for i, v in enumerate(lz):
            z = math.exp(v)
            a = unit.tail_integral_of_inverse(z)
            b = unit.tail_sq_integral_of_inverse(z)
            l1[i] = math.log(a) if a > 0 else -np.inf
            l2[i] = math.log(b) if b > 0 else -np.inf
        ok = np.isfinite(l1) & np.isfinite(l2)
        lz, l1, l2 = lz[ok], l1[ok], l2[ok]
        return (
            lz,
            interpolate.CubicSpline(lz, l1, extrapolate=True),
            interpolate.CubicSpline(lz, l2, extrapolate=True),
        )

    def _table_eval(self, z, which):
        lz, s1, s2 = self._functional_table
        spl = s1 if which == 1 else s2
        x = np.log(z)
        out = spl(np.clip(x, lz[0], lz[-1]))
        # linear extrapolation in log-log beyond the table
        lo, hi = x < lz[0], x > lz[-1]
        if np.any(lo):
            out[lo] = spl(lz[0]) + spl(lz[0], 1) * (x[lo] - lz[0])
        if np.any(hi):
            out[hi] = spl(lz[-1]) + spl(lz[-1], 1) * (x[hi] - lz[-1])
        return out

    def log_tail_integral_fast(self, z):
        """Vectorized ``log ∫_z^∞ φ``; closed form where available, else a spline table."""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            out = self._log_tail_int_unit(z)
            if out is None:
                out = self._table_eval(z, 1)
        return np.asarray(out, dtype=float) + self._log_scale

    def log_tail_sq_integral_fast(self, z):
        """Vectorized ``log ∫_z^∞ φ²``."""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            out = self._log_tail_sq_int_unit(z)
            if out is None:
                out = self._table_eval(z, 2)
        return np.asarray(out, dtype=float) + 2.0 * self._log_scale

    def log_phi_fast(self, z):
        """Vectorized ``log φ(z)`` (``-inf`` where φ vanishes)."""
        z = np.asarray(z, dtype=float)
        with np.errstate(divide="ignore"):
            return np.log(self.tail_inverse(z))

    # -- numba kernel encoding ------------------------------------------------
    def kernel_spec(self):
        raise LevyMeasureError(f"{type(self).__name__} cannot be simulated by the kernels")

    # -- construction-time (VV) validation -----------------------------------
    def _validate(self):
        i1 = self.small_jump_mean(1.0)
        if not np.isfinite(i1):
            raise DivergenceError("I(1) is not finite")


class StablePositive(LevyMeasure):
    """``tail(x) = (x/scale)^{-beta}``, ``0 < beta < 1``."""

    kind = Kind.STABLE
    has_closed_inverse = True

    def __init__(self, beta: float, scale: float = 1.0, validate: bool = True):
        if not 0 < beta < 1:
            raise LevyMeasureError("StablePositive needs 0 < beta < 1")
        self.beta = float(beta)
        super().__init__(scale, validate)

    @property
    def params(self):
        return {"beta": self.beta, "scale": self.scale}

    def _log_tail_unit(self, w):
        return -self.beta * w

    def _phi_unit(self, s):
        return s ** (-1.0 / self.beta)

    def _log_tail_int_unit(self, z):
        a = 1.0 / self.beta - 1.0
        return -a * np.log(z) - math.log(a)

    def _log_tail_sq_int_unit(self, z):
        a = 2.0 / self.beta - 1.0
        return -a * np.log(z) - math.log(a)

    def log_phi_fast(self, z):
        return self._log_scale - np.log(np.asarray(z, dtype=float)) / self.beta

    def laplace_exponent(self, u):
        if not u > 0:
            raise LevyMeasureError("u must be positive")
        b = self.beta
        phi = math.gamma(1.0 - b) * (self.scale * u) ** b
        return phi, b * phi / u, b * (b - 1.0) * phi / (u * u)

    def laplace_exponent_vec(self, u, step: float = 0.02):
        u = np.asarray(u, dtype=float)
        b = self.beta
        phi = math.gamma(1.0 - b) * (self.scale * u) ** b
        return phi, b * phi / u, b * (b - 1.0) * phi / (u * u)

    def kernel_spec(self):
        return KERNEL_STABLE, np.array([1.0 / self.beta, self._log_scale]), _EMPTY, _EMPTY


class ExpCompoundPoisson(LevyMeasure):
    """``tail(x) = exp(-x/scale)``: compound Poisson with unit rate, exponential jumps."""

    kind = Kind.EXP_CP
    tail_at_zero_infinite = False
    has_closed_inverse = True

    def _log_tail_unit(self, w):
        return -np.exp(w)

    def _phi_unit(self, s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(s < 1.0, -np.log(np.minimum(s, 1.0)), 0.0)

    def _log_tail_int_unit(self, z):
        zc = np.minimum(z, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = 1.0 - zc + zc * np.log(zc)
            return np.where(z < 1.0, np.log(np.maximum(val, 0.0)), -np.inf)

    def _log_tail_sq_int_unit(self, z):
        zc = np.minimum(z, 1.0)
        lz = np.log(zc)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = 2.0 - zc * (lz * lz - 2.0 * lz + 2.0)
            return np.where(z < 1.0, np.log(np.maximum(val, 0.0)), -np.inf)

    def kernel_spec(self):
        return KERNEL_EXP, np.array([self._log_scale]), _EMPTY, _EMPTY


class LogSlowlyVarying(LevyMeasure):
    """``tail(x) = log(1 + scale/x)``: slowly varying at zero."""

    kind = Kind.LOG_SV
    has_closed_inverse = True

    def _log_tail_unit(self, w):
        return np.log(np.logaddexp(0.0, -w))

    def _phi_unit(self, s):
        with np.errstate(over="ignore"):
            return 1.0 / np.expm1(s)

    def log_phi_fast(self, z):
        z = np.asarray(z, dtype=float)
        big = z > 30.0
        small_z = np.where(big, 1.0, z)
        big_z = np.where(big, z, 30.0)
        out = np.where(big, -big_z - np.log1p(-np.exp(-big_z)), -np.log(np.expm1(small_z)))
        return out + self._log_scale

    def _log_tail_int_unit(self, z):
        # ∫_z^∞ 1/(e^s - 1) ds = -log(1 - e^{-z})
        e = np.exp(-z)
        return np.where(z > 30.0, -z + np.log1p(0.5 * e), np.log(-np.log1p(-e)))

    def _log_tail_sq_int_unit(self, z):
        # ∫_z^∞ (e^s - 1)^{-2} ds = w/(1-w) + log(1-w), w = e^{-z}
        # series w²/2 + 2w³/3 + 3w⁴/4 for small w, taken in log space
        w = np.exp(-z)
        small = w < 1e-3
        ws = np.where(small, w, 0.0)
        log_series = -2.0 * z + np.log(0.5 + 2.0 / 3.0 * ws + 0.75 * ws * ws)
        wb = np.where(small, 0.5, w)
        direct = np.log(wb / (1.0 - wb) + np.log1p(-wb))
        return np.where(small, log_series, direct)

    def kernel_spec(self):
        return KERNEL_LOGSV, np.array([self._log_scale]), _EMPTY, _EMPTY


class IndexOneLogCorrected(LevyMeasure):
    """``tail(x) = x^{-1} (log(e + 1/x))^{-2}`` in unit scale: regularly varying with index -1."""

    kind = Kind.INDEX_ONE

    def _log_tail_unit(self, w):
        return -w - 2.0 * np.log(np.logaddexp(_LOG_E, -w))

    def log_phi_fast(self, z):
        from .kernels import index_one_log_phi_vec

        return index_one_log_phi_vec(np.asarray(z, dtype=float)) + self._log_scale

    def kernel_spec(self):
        return KERNEL_INDEX1, np.array([self._log_scale]), _EMPTY, _EMPTY


_EMPTY = np.zeros(0)


class StepTail(LevyMeasure):
    """Purely atomic measure: right-continuous step tail.

    ``atoms`` are jump positions and ``masses`` their weights.  All functionals
    are exact finite sums.
    """

    kind = Kind.USER
    tail_at_zero_infinite = False
    has_closed_inverse = True

    def __init__(self, atoms, masses, scale: float = 1.0, validate: bool = True):
        a = np.asarray(atoms, dtype=float)
        m = np.asarray(masses, dtype=float)
        if a.shape != m.shape or a.ndim != 1 or a.size == 0:
            raise LevyMeasureError("atoms and masses must be matching 1-d arrays")
        if np.any(a <= 0) or np.any(m < 0) or not np.all(np.isfinite(m)):
            raise LevyMeasureError("atoms must be positive and masses finite and nonnegative")
        order = np.argsort(-a)
        self._atoms_unit = a[order]
        self._masses = m[order]
        self._cum = np.cumsum(self._masses)
        super().__init__(scale, validate)

    @classmethod
    def from_envelope(cls, x, values, scale: float = 1.0):
        """Build from sampled pairs ``(x_j, tail(x_j))`` read as a right-continuous step function.

        The tail equals ``values[j]`` on ``[x_j, x_{j+1})`` and ``values[0]`` below ``x_0``;
        the last value must be 0.
        """
        x = np.asarray(x, dtype=float)
        v = np.asarray(values, dtype=float)
        order = np.argsort(x)
        x, v = x[order], v[order]
        if np.any(np.diff(v) > 0):
            raise LevyMeasureError("tail values must be nonincreasing in x")
        if v[-1] != 0.0:
            raise LevyMeasureError("the last tail value must be 0 (tail(x) -> 0)")
        masses = v[:-1] - v[1:]
        return cls(x[1:], masses, scale=scale)

    @property
    def atoms(self):
        return self._atoms_unit * self.scale

    @property
    def masses(self):
        return self._masses

    @property
    def params(self):
        return {"atoms": self._atoms_unit.tolist(), "masses": self._masses.tolist(), "scale": self.scale}

    def describe(self):
        return {"kind": self.kind.value, "n_atoms": int(self._atoms_unit.size), "scale": self.scale}

    def _log_tail_unit(self, w):
        x = np.exp(w)
        # atoms strictly above x
        k = np.searchsorted(-self._atoms_unit, -x, side="left")
        cum = np.concatenate(([0.0], self._cum))
        with np.errstate(divide="ignore"):
            return np.log(cum[k])

    def _phi_unit(self, s):
        s = np.asarray(s, dtype=float)
        k = np.searchsorted(self._cum, s, side="right")
        ext = np.concatenate((self._atoms_unit, [0.0]))
        return ext[k]

    def tail_zero_limit(self):
        return float(self._cum[-1])

    # exact functionals -------------------------------------------------------
    def small_jump_mean(self, x):
        if not x > 0:
            raise LevyMeasureError("x must be positive")
        return float(np.sum(self._masses * np.minimum(self.atoms, x)))

    def second_truncated_moment(self, v):
        if not v > 0:
            raise LevyMeasureError("v must be positive")
        a = self.atoms
        sel = a <= v
        return float(np.sum(self._masses[sel] * a[sel] ** 2))

    def laplace_exponent(self, u):
        if not u > 0:
            raise LevyMeasureError("u must be positive")
        a = self.atoms
        e = np.exp(-u * a)
        return (
            float(np.sum(self._masses * -np.expm1(-u * a))),
            float(np.sum(self._masses * a * e)),
            -float(np.sum(self._masses * a * a * e)),
        )

    def laplace_exponent_vec(self, u, step: float = 0.02):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        a, m = self.atoms, self._masses
        ua = u[:, None] * a
        e = np.exp(-ua)
        return -np.expm1(-ua) @ m, e @ (m * a), -(e @ (m * a * a))

    def _step_integrals(self, s0, power):
        a = np.concatenate((self.atoms, [0.0]))
        widths = a[:-1] ** power - a[1:] ** power
        excess = np.maximum(self._cum - s0, 0.0)
        return float(np.sum(widths * excess))

    def tail_integral_of_inverse(self, s0):
        if not s0 > 0:
            raise LevyMeasureError("s0 must be positive")
        return self._step_integrals(s0, 1)

    def tail_sq_integral_of_inverse(self, s0):
        if not s0 > 0:
            raise LevyMeasureError("s0 must be positive")
        return self._step_integrals(s0, 2)

    def log_tail_integral_fast(self, z):
        z = np.atleast_1d(np.asarray(z, dtype=float))
        with np.errstate(divide="ignore"):
            return np.log([self._step_integrals(v, 1) for v in z])

    def log_tail_sq_integral_fast(self, z):
        z = np.atleast_1d(np.asarray(z, dtype=float))
        with np.errstate(divide="ignore"):
            return np.log([self._step_integrals(v, 2) for v in z])

    def kernel_spec(self):
        return KERNEL_STEP, np.array([self._log_scale]), self.atoms.copy(), self._cum.copy()

    def _validate(self):
        pass


class BlockOscillating(StepTail):
    """Step tail with jumps at triangular-numbered decades.

    The tail jumps at ``x_k = base^{-k(k+1)/2}`` (k = 0, 1, ...) and equals
    ``base^{theta (k+1)(k+2)/2}`` on ``[x_{k+1}, x_k)``.  It touches the
    envelope ``x^{-theta}`` at every jump point, and the gaps between jumps
    grow by one decade each time.  The growing gaps drive the ratio
    ``x² tail(x) / V2(x)`` to infinity and ``x tail(x) / I(x)`` to zero
    along the jump points, so the measure is neither centered Feller nor
    satisfies the liminf condition on relative stability.
    """

    kind = Kind.BLOCK
    tail_at_zero_infinite = True

    def __init__(self, theta: float = 0.5, base: float = 10.0, scale: float = 1.0, validate: bool = True):
        if not 0 < theta < 1:
            raise LevyMeasureError("theta must lie in (0, 1)")
        if not base > 1:
            raise LevyMeasureError("base must exceed 1")
        self.theta = float(theta)
        self.base = float(base)
        lb = math.log10(self.base)
        ks = []
        k = 0
        while (k * (k + 1) / 2) * lb < 300:
            ks.append(k)
            k += 1
        ks = np.array(ks, dtype=float)
        tri = ks * (ks + 1) / 2
        atoms = self.base ** (-tri)
        levels = self.base ** (self.theta * (ks + 1) * (ks + 2) / 2)
        masses = np.diff(np.concatenate(([0.0], levels)))
        super().__init__(atoms, masses, scale=scale, validate=validate)

    @property
    def params(self):
        return {"theta": self.theta, "base": self.base, "scale": self.scale}

    def describe(self):
        return {"kind": self.kind.value, **self.params}

    def _log_tail_unit(self, w):
        w = np.asarray(w, dtype=float)
        out = super()._log_tail_unit(w)
        deep = w < math.log(self._atoms_unit[-1])
        if np.any(deep):
            d = -w[deep] / math.log(self.base)
            r = np.ceil((-1.0 + np.sqrt(1.0 + 8.0 * d)) / 2.0)
            out = np.array(out, dtype=float)
            out[deep] = self.theta * r * (r + 1) / 2 * math.log(self.base)
        return out

    def tail_zero_limit(self):
        return math.inf


_BUILTINS = {
    "stable": StablePositive,
    "stable_positive": StablePositive,
    "exp_cp": ExpCompoundPoisson,
    "exp_compound_poisson": ExpCompoundPoisson,
    "log_sv": LogSlowlyVarying,
    "log_slowly_varying": LogSlowlyVarying,
    "index_one": IndexOneLogCorrected,
    "index_one_log_corrected": IndexOneLogCorrected,
    "block": BlockOscillating,
    "block_oscillating": BlockOscillating,
}


def from_name(name: str, **params) -> LevyMeasure:
    """Instantiate a built-in measure by config name."""
    key = name.strip().lower().replace("-", "_")
    if key not in _BUILTINS:
        raise LevyMeasureError(f"unknown measure {name!r}; choose from {sorted(set(_BUILTINS))}")
    return _BUILTINS[key](**params)


def from_csv(path, scale: float = 1.0) -> StepTail:
    """Read a two-column ``x, tail(x)`` CSV (header optional) as a step envelope."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            try:
                rows.append((float(parts[0]), float(parts[1])))
            except ValueError:
                if rows:
                    raise LevyMeasureError(f"bad row in {path}: {line!r}")
    if len(rows) < 2:
        raise LevyMeasureError(f"{path}: need at least two rows")
    x, v = zip(*rows)
    return StepTail.from_envelope(x, v, scale=scale)
