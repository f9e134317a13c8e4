import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snlevy import weights as W
from snlevy.weights import WeightError

TP = W.two_point(0, 1, 0.5)
LAWS = [TP, W.two_point(-1, 3, 0.2), W.uniform(0, 2), W.gaussian(0, 1), W.gaussian(1.5, 0.4),
        W.empirical([0.0, 1.0, 1.0, 4.0])]


def test_degenerate_rejected_unless_overridden():
    with pytest.raises(WeightError):
        W.two_point(0, 1, 1.0)
    f = W.two_point(0, 1, 1.0, allow_degenerate=True)
    assert np.all(f.sample(np.random.default_rng(0), 100) == 1.0)


def test_two_point_sample_mean():
    x = TP.sample(np.random.default_rng(1), 100_000)
    assert abs(x.mean() - 0.5) <= 4 * 0.5 / math.sqrt(1e5)


def test_gaussian_sample_variance():
    x = W.gaussian().sample(np.random.default_rng(2), 100_000)
    assert abs(x.var(ddof=1) - 1.0) < 0.05


def test_frac_moment_pair_examples():
    m, s = TP.frac_moment_pair(0.25, 0.5)
    assert m == pytest.approx(0.683013, abs=1e-6)
    assert s == pytest.approx(-0.183013, abs=1e-6)
    assert TP.frac_moment_pair(0.5, 0.5)[1] == 0.0
    assert W.gaussian().frac_moment_pair(0.0, 0.5)[1] == pytest.approx(0.0, abs=1e-12)


def test_sign_at_atom_is_zero():
    # the atom at x contributes 0 to both sums
    m, s = TP.frac_moment_pair(1.0, 0.5)
    assert (m, s) == pytest.approx((0.5, 0.5), rel=1e-15)


def test_moments():
    assert TP.mean == 0.5 and TP.variance == 0.25 and TP.second_moment == 0.5
    u = W.uniform(0, 2)
    assert u.mean == pytest.approx(1.0) and u.variance == pytest.approx(1 / 3)
    g = W.gaussian(0, 1)
    assert g.abs_mean == pytest.approx(math.sqrt(2 / math.pi), rel=1e-8)
    assert g.p_moment(3.0) == pytest.approx(2 * math.sqrt(2 / math.pi), rel=1e-8)
    # E|X| for N(mu, 1): sqrt(2/pi) exp(-mu²/2) + mu (1 - 2 Phi(-mu))
    from scipy.stats import norm

    mu = 0.3
    ref = math.sqrt(2 / math.pi) * math.exp(-mu * mu / 2) + mu * (1 - 2 * norm.cdf(-mu))
    assert W.gaussian(mu, 1.0).abs_mean == pytest.approx(ref, rel=1e-8)


def test_empirical_from_csv(tmp_path):
    p = tmp_path / "w.csv"
    p.write_text("value\n2\n0\n1\n1\n")
    f = W.empirical_from_csv(p)
    assert list(f.atoms) == [0.0, 1.0, 2.0]
    assert list(f.probs) == pytest.approx([0.25, 0.5, 0.25])
    assert f.cdf(1.0) == pytest.approx(0.75)
    assert f.cdf_left(1.0) == pytest.approx(0.25)


def test_from_name():
    assert W.from_name("normal", mu=0, sigma=2).variance == pytest.approx(4.0)
    with pytest.raises(WeightError):
        W.from_name("cauchy")


@pytest.mark.parametrize("f", LAWS, ids=lambda f: f.kind.value)
def test_vectorized_pair_matches_scalar(f):
    x = np.linspace(-2, 4, 13)
    m, s = f.frac_moment_pair_vec(x, 0.4)
    for k, xk in enumerate(x):
        mk, sk = f.frac_moment_pair(xk, 0.4)
        assert m[k] == pytest.approx(mk, rel=1e-8)
        assert s[k] == pytest.approx(sk, rel=1e-8, abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(st.sampled_from(LAWS), st.floats(-5, 5), st.floats(0.05, 0.95))
def test_pair_bounded(f, x, beta):
    m, s = f.frac_moment_pair(x, beta)
    assert m > 0
    assert abs(s) <= m * (1 + 1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(0.1, 3), st.floats(0.05, 0.95))
def test_symmetric_law_has_zero_s_at_centre(mu, sigma, beta):
    assert W.gaussian(mu, sigma).frac_moment_pair(mu, beta)[1] == pytest.approx(0.0, abs=1e-9)
    assert W.uniform(mu - sigma, mu + sigma).frac_moment_pair(mu, beta)[1] == pytest.approx(0.0, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(0.05, 0.95))
def test_s_odd_under_reflection(x, beta):
    f = W.two_point(-1, 2, 0.3)
    g = W.two_point(-2, 1, 0.7)  # law of -X
    mf, sf = f.frac_moment_pair(x, beta)
    mg, sg = g.frac_moment_pair(-x, beta)
    assert mf == pytest.approx(mg, rel=1e-12)
    assert sf == pytest.approx(-sg, rel=1e-12, abs=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.floats(-2, 3), st.floats(0.05, 0.95))
def test_m_continuous(x, beta):
    f = W.uniform(0, 2)
    assert f.frac_moment_pair(x + 1e-7, beta)[0] == pytest.approx(f.frac_moment_pair(x, beta)[0], abs=1e-5)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([W.gaussian(0.4, 1.7), W.uniform(-1, 2)]), st.floats(-6, 6), st.floats(-0.9, 0.95))
def test_closed_pair_matches_quadrature(f, x, beta):
    if beta < 0 and f.kind.value == "uniform" and min(abs(x + 1), abs(x - 2)) < 1e-3:
        return  # the negative power is too sharp for quadrature right at the edges
    m, s = f.frac_moment_pair(x, beta)
    mq, sq = f._frac_quad(x, beta)
    assert m == pytest.approx(mq, rel=1e-9)
    assert s == pytest.approx(sq, rel=1e-9, abs=1e-12 * mq)
