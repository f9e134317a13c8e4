import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from snlevy import weights as W
from snlevy.levy_measure import (
    BlockOscillating,
    ExpCompoundPoisson,
    IndexOneLogCorrected,
    LogSlowlyVarying,
    StablePositive,
)
from snlevy.limits import (
    ConditionWarning,
    LimitError,
    LimitLaw,
    arcsine_cdf,
    arcsine_density,
    expected_rt,
    fourier_cdf,
    lamperti_density,
    limit_cdf,
    limit_density,
    limit_second_moment,
    stable_cexp,
)

TP = W.two_point(0, 1, 0.5)
ARC = LimitLaw(0.5, TP)


# -- limit cdf --------------------------------------------------------------------


def test_limit_cdf_examples():
    assert limit_cdf(0.5, ARC) == pytest.approx(0.5, abs=1e-15)
    assert limit_cdf(0.25, ARC) == pytest.approx(1 / 3, abs=1e-14)
    assert limit_cdf(1.5, LimitLaw(1.0, W.gaussian(1, 2))) == 1.0
    assert limit_cdf(0.5, LimitLaw(1.0, W.gaussian(1, 2))) == 0.0


def test_limit_cdf_beta_zero_is_weight_law():
    g = W.gaussian(0.2, 1.3)
    x = np.linspace(-3, 3, 11)
    assert np.allclose(limit_cdf(x, LimitLaw(0.0, g)), g.cdf(x), rtol=0, atol=0)


def test_arcsine_identity_on_grid():
    x = np.linspace(0.01, 0.99, 50)
    assert np.allclose(limit_cdf(x, ARC), arcsine_cdf(x), rtol=0, atol=1e-13)


@pytest.mark.parametrize("law", [LimitLaw(0.3, W.two_point(0, 1, 0.3)), LimitLaw(0.7, W.uniform(-1, 2)),
                                 LimitLaw(0.5, W.gaussian(0, 1)), LimitLaw(0.6, W.empirical([0, 1, 3]))],
                         ids=["tp", "uniform", "gauss", "emp"])
def test_limit_cdf_is_a_cdf(law):
    x = np.linspace(-20, 20, 801)
    F = limit_cdf(x, law)
    assert np.all(np.diff(F) >= -1e-14)
    assert F[0] < 0.01 and F[-1] > 0.99
    assert np.all((F >= 0) & (F <= 1))


@pytest.mark.parametrize("beta,p", [(0.3, 0.3), (0.5, 0.5), (0.7, 0.3), (0.5, 0.8)])
def test_cdf_derivative_matches_lamperti(beta, p):
    law = LimitLaw(beta, W.two_point(0, 1, p))
    h = 1e-6
    for x in np.linspace(0.05, 0.95, 19):
        fd = (limit_cdf(x + h, law) - limit_cdf(x - h, law)) / (2 * h)
        assert fd == pytest.approx(lamperti_density(x, beta, p), rel=1e-5)
        assert limit_density(x, law) == pytest.approx(lamperti_density(x, beta, p), rel=1e-10)


# -- closed-form densities --------------------------------------------------------


def test_arcsine_density_examples():
    assert arcsine_density(0.5) == pytest.approx(2 / math.pi, rel=1e-15)
    assert integrate.quad(arcsine_density, 0, 1)[0] == pytest.approx(1.0, abs=1e-8)
    assert arcsine_density(0.1) == pytest.approx(arcsine_density(0.9), rel=1e-14)


def test_lamperti_examples():
    assert lamperti_density(0.5, 0.5, 0.5) == pytest.approx(2 / math.pi, rel=1e-14)
    for beta, p in ((0.3, 0.2), (0.8, 0.6)):
        val = integrate.quad(lambda x: lamperti_density(x, beta, p), 0, 1, limit=200)[0]
        assert val == pytest.approx(1.0, abs=1e-6)
    x = np.linspace(0.1, 0.9, 9)
    assert np.allclose(lamperti_density(x, 0.5, 0.5), arcsine_density(x), rtol=1e-10, atol=0)


def test_domain_errors():
    with pytest.raises(ValueError):
        arcsine_density(1.0)
    with pytest.raises(ValueError):
        lamperti_density(0.5, 1.0, 0.5)
    with pytest.raises(ValueError):
        LimitLaw(1.2, TP)


# -- characteristic exponent and inversion ------------------------------------------


def test_stable_cexp_examples():
    assert stable_cexp(0.0, 0.0, ARC) == 0
    assert stable_cexp(0.0, 1.0, ARC) == pytest.approx(complex(-1, 1), abs=1e-15)
    a = stable_cexp(1.3, -0.7, ARC)
    assert stable_cexp(-1.3, 0.7, ARC) == pytest.approx(a.conjugate(), rel=1e-14)


def test_stable_cexp_matches_direct_sum():
    beta, tau = 0.4, math.tan(0.2 * math.pi)
    law = LimitLaw(beta, W.two_point(-1, 2, 0.3), scale_c=2.0)
    th1, th2 = 0.8, 0.5
    ref = 0
    for u, pr in ((-1, 0.7), (2, 0.3)):
        z = th1 * u + th2
        ref += pr * abs(z) ** beta * (1 - 1j * np.sign(z) * tau)
    assert stable_cexp(th1, th2, law) == pytest.approx(-2.0 * ref, rel=1e-13)


def test_fourier_examples():
    assert fourier_cdf(0.5, ARC)[0] == pytest.approx(0.5, abs=1e-6)
    val, err = fourier_cdf(0.25, ARC)
    assert val == pytest.approx(1 / 3, abs=1e-4)
    assert err < 1e-8
    c37 = LimitLaw(0.5, TP, scale_c=3.7)
    assert fourier_cdf(0.25, c37)[0] == pytest.approx(val, abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.15, 0.85), st.floats(0.1, 0.9), st.floats(-0.5, 1.5))
def test_fourier_matches_closed_form(beta, p, x):
    law = LimitLaw(beta, W.two_point(0, 1, p))
    assert fourier_cdf(x, law)[0] == pytest.approx(limit_cdf(x, law), abs=1e-6)


def test_fourier_continuous_weights():
    law = LimitLaw(0.6, W.gaussian(0.5, 1.0))
    for x in (-1.0, 0.3, 2.0):
        assert fourier_cdf(x, law)[0] == pytest.approx(limit_cdf(x, law), abs=1e-6)


def test_fourier_rejects_edge_betas():
    with pytest.raises(LimitError):
        fourier_cdf(0.3, LimitLaw(0.0, TP))


# -- moments -----------------------------------------------------------------------


def test_second_moment_examples():
    g = W.gaussian(0.4, 1.5)
    assert limit_second_moment(LimitLaw(1.0, g)) == pytest.approx(0.16)
    assert limit_second_moment(LimitLaw(0.0, g)) == pytest.approx(g.second_moment)
    assert limit_second_moment(ARC) == pytest.approx(0.375, rel=1e-15)
    ref = integrate.quad(lambda x: x * x * arcsine_density(x), 0, 1)[0]
    assert ref == pytest.approx(0.375, abs=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 1), st.floats(-2, 2), st.floats(0.1, 3))
def test_second_moment_bracket(beta, mu, sigma):
    g = W.gaussian(mu, sigma)
    v = limit_second_moment(LimitLaw(beta, g))
    assert mu * mu - 1e-12 <= v <= g.second_moment + 1e-12


@pytest.mark.parametrize("beta", [0.25, 0.5, 0.75])
@pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
def test_expected_rt_stable(beta, t):
    assert expected_rt(t, StablePositive(beta)) == pytest.approx(1 - beta, abs=1e-6)


@pytest.mark.parametrize("m", [ExpCompoundPoisson(), LogSlowlyVarying(), IndexOneLogCorrected(),
                               BlockOscillating()], ids=repr)
def test_expected_rt_in_unit_interval(m):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConditionWarning)
        for t in (0.1, 1.0, 10.0):
            assert 0.0 <= expected_rt(t, m) <= 1.0


def test_expected_rt_frozen_values():
    # Monte Carlo with 2000 replicates: 0.526 ± 0.010 and 0.560 ± 0.005
    assert expected_rt(1.0, ExpCompoundPoisson()) == pytest.approx(0.528482235, abs=1e-6)
    assert expected_rt(1.0, LogSlowlyVarying()) == pytest.approx(0.561459484, abs=1e-6)


def test_expected_rt_warns_without_condition():
    with pytest.warns(ConditionWarning):
        expected_rt(1.0, BlockOscillating())
