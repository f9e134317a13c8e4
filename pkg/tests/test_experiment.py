import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from snlevy.experiment import (
    ConfigError,
    ExperimentConfig,
    ks_conditional_gaussian,
    ks_critical,
    ks_statistic,
    ks_two_sample,
    run_verify,
)


def _ecdf(sample):
    s = np.sort(sample)
    return lambda x: np.searchsorted(s, x, side="right") / s.size


def test_ks_self_comparison_midpoint():
    x = np.random.default_rng(0).random(200)
    assert ks_statistic(x, _ecdf(x)) == pytest.approx(1 / 400, abs=1e-15)
    assert ks_statistic(x, _ecdf(x), convention="classical") == pytest.approx(1 / 200, abs=1e-15)


def test_ks_constant_sample_against_step():
    x = np.full(50, 2.0)
    step = lambda v: (np.asarray(v) >= 2.0).astype(float)  # noqa: E731
    assert ks_statistic(x, step) == 0.5


def test_ks_uniform_below_critical():
    x = np.random.default_rng(1).random(100_000)
    assert ks_statistic(x, lambda v: np.clip(v, 0, 1)) < 1.63 / math.sqrt(x.size)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=60))
def test_classical_matches_scipy(values):
    x = np.array(values)
    ref = stats.kstest(x, stats.norm.cdf).statistic
    assert ks_statistic(x, stats.norm.cdf, convention="classical") == pytest.approx(ref, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=1, max_size=60))
def test_ks_in_unit_interval_with_ties(values):
    x = np.array(values, dtype=float)
    for conv in ("midpoint", "classical"):
        d = ks_statistic(x, lambda v: np.clip(np.asarray(v) / 4, 0, 1), convention=conv)
        assert 0 <= d <= 1


def test_ks_critical_values():
    assert ks_critical(10**5, 0.01) == pytest.approx(1.6276 / math.sqrt(1e5), rel=2e-3)
    d, crit = ks_two_sample(np.arange(10.0), np.arange(10.0) + 0.5)
    assert d == pytest.approx(0.1) and crit == pytest.approx(1.6276 * math.sqrt(0.2), rel=1e-3)


def test_conditional_gaussian_distance():
    # all R = 1 means T ~ N(mu, sigma²) exactly
    assert ks_conditional_gaussian(np.ones(10), 0.0, 1.0) == pytest.approx(0.0, abs=1e-15)
    # a point mass at R = 1/4 is N(0, 1/4): distance between the two normal cdfs
    z = np.linspace(-8, 8, 4001)
    ref = np.max(np.abs(stats.norm.cdf(2 * z) - stats.norm.cdf(z)))
    assert ks_conditional_gaussian(np.full(5, 0.25), 1.0, 3.0) == pytest.approx(ref, rel=1e-12)


def _write(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_config_from_ini(tmp_path):
    p = _write(tmp_path, """
[run]
t = 0.1, 1
n = 500
seed = 9
engine = layered
[measure]
name = stable
beta = 0.3
[weights]
name = gaussian
mu = 1
[truncation]
tol = 1e-4
[target]
kind = limit_cdf
""")
    cfg = ExperimentConfig.from_ini(p, {"run.n": "700"})
    assert cfg.t_values == (0.1, 1.0) and cfg.n == 700 and cfg.engine == "layered"
    assert cfg.build_measure().beta == 0.3
    assert cfg.build_weights().mean == 1.0
    assert cfg.limit_beta() == pytest.approx(0.3)
    assert cfg.engine_config().tol == 1e-4


@pytest.mark.parametrize("text", [
    "[run]\nt = -1\n",
    "[run]\nn = 0\n",
    "[run]\nengine = magic\n",
    "[target]\nkind = other\n",
    "[measure]\ncsv = missing.csv\n",
    "[target]\nks_method = conditional\n",
    "[run]\nn = many\n",
])
def test_config_errors(tmp_path, text):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_ini(_write(tmp_path, text))


def test_config_relative_csv_paths(tmp_path):
    (tmp_path / "w.csv").write_text("0\n1\n3\n")
    p = _write(tmp_path, "[weights]\ncsv = w.csv\n[target]\nkind = none\n")
    cfg = ExperimentConfig.from_ini(p)
    assert cfg.build_weights().mean == pytest.approx(4 / 3)


def test_run_verify_stable():
    cfg = ExperimentConfig(t_values=(1.0, 5.0), n=3000, seed=3)
    results, batches = run_verify(cfg)
    assert len(results) == 2 and len(batches) == 2
    for r in results:
        assert r.passed, r.passes
        assert 0 <= r.ks_statistic <= 1
        assert abs(r.mean_R - 0.5) < 0.03
    assert results[0].row()["pass"] == 1


def test_run_verify_point_mass_variance_check():
    cfg = ExperimentConfig(measure="stable", measure_params={"beta": 0.5}, target="point_mass",
                           var_ratio_max=0.01, n=500, seed=1, tol=1e-3)
    results, _ = run_verify(cfg)
    assert results[0].passes["variance"] is False


def test_run_verify_conditional_trend():
    cfg = ExperimentConfig(measure="log_sv", measure_params={}, weights="gaussian", weight_params={},
                           t_values=(1e-2, 1e-3), n=2000, seed=5, target="weight_cdf",
                           trend="decreasing", ks_method="conditional", ks_max=0.05)
    results, _ = run_verify(cfg)
    assert results[1].ks_statistic < results[0].ks_statistic < 0.01
    assert all(r.passed for r in results)
