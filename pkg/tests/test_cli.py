import json
import os

import pytest

from snlevy.cli import EXIT_FAIL, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main

SMALL = """
[run]
t = 1
n = 1500
seed = 4
[measure]
name = stable
beta = 0.5
[weights]
name = two_point
[truncation]
tol = 1e-4
[target]
kind = limit_cdf
[limit]
x_min = 0.05
x_max = 0.95
points = 7
"""


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "small.ini"
    p.write_text(SMALL)
    return str(p)


def _read(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_verify_passes_and_is_byte_identical(cfg, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["verify", "--config", cfg, "--out", str(a), "-q"]) == EXIT_OK
    assert main(["verify", "--config", cfg, "--out", str(b), "-q"]) == EXIT_OK
    for name in ("comparison.csv", "batch_0.csv", "manifest.json"):
        assert _read(a / name) == _read(b / name)
    man = json.loads((a / "manifest.json").read_text())
    assert man["passed"] is True and man["config"]["seed"] == 4
    assert "numpy" in man["versions"]
    assert os.path.exists(a / "timing.json")


def test_seed_override_changes_output(cfg, tmp_path):
    main(["verify", "--config", cfg, "--out", str(tmp_path / "a"), "-q"])
    main(["verify", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "5", "-q"])
    assert _read(tmp_path / "a" / "batch_0.csv") != _read(tmp_path / "b" / "batch_0.csv")


def test_jobs_do_not_change_output(cfg, tmp_path):
    main(["verify", "--config", cfg, "--out", str(tmp_path / "a"), "-q"])
    main(["verify", "--config", cfg, "--out", str(tmp_path / "b"), "--jobs", "2", "-q"])
    assert _read(tmp_path / "a" / "batch_0.csv") == _read(tmp_path / "b" / "batch_0.csv")


def test_verify_failure_exit_code(cfg, tmp_path):
    rc = main(["verify", "--config", cfg, "--out", str(tmp_path), "-q",
               "--set", "target.kind=point_mass", "--set", "target.var_ratio_max=0.01"])
    assert rc == EXIT_FAIL


def test_json_format(cfg, tmp_path):
    assert main(["verify", "--config", cfg, "--out", str(tmp_path), "--format", "json", "-q"]) == EXIT_OK
    rows = json.loads((tmp_path / "comparison.json").read_text())
    assert rows[0]["pass"] == 1


def test_simulate(cfg, tmp_path):
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path), "-q"]) == EXIT_OK
    lines = (tmp_path / "batch_0.csv").read_text().splitlines()
    assert lines[0] == "replicate,T,R,V" and len(lines) == 1501
    side = json.loads((tmp_path / "batch_0.json").read_text())
    assert side["n"] == 1500 and side["engine"] == "series"


@pytest.mark.parametrize("method", ["closed", "fourier"])
def test_limit(cfg, tmp_path, method):
    assert main(["limit", "--config", cfg, "--out", str(tmp_path), "--method", method, "-q"]) == EXIT_OK
    rows = (tmp_path / "limit.csv").read_text().splitlines()
    assert rows[0] == "x,cdf,density" and len(rows) == 8
    x, F, _ = map(float, rows[4].split(","))
    assert x == pytest.approx(0.5) and F == pytest.approx(0.5, abs=1e-9)
    side = json.loads((tmp_path / "limit.json").read_text())
    assert side["method"] == method


def test_diagnose(tmp_path, capsys):
    rc = main(["diagnose", "--out", str(tmp_path), "--set", "measure.name=block",
               "--set", "diagnose.decades=6"])
    assert rc == EXIT_OK
    assert "NotFellerLikely" in capsys.readouterr().out
    rep = json.loads((tmp_path / "diagnostics.json").read_text())
    assert rep["scans"]["centered_feller"]["flag"] is True
    assert os.path.exists(tmp_path / "relative_stability.csv")


def test_er_rt(cfg, tmp_path):
    assert main(["er-rt", "--config", cfg, "--out", str(tmp_path), "-q"]) == EXIT_OK
    header, row = (tmp_path / "er_rt.csv").read_text().splitlines()
    vals = dict(zip(header.split(","), row.split(",")))
    assert float(vals["expected_rt"]) == pytest.approx(0.5, abs=1e-6)
    assert abs(float(vals["mc_mean_R"]) - 0.5) < 0.05


def test_usage_errors(tmp_path, cfg):
    assert main([]) == EXIT_USAGE
    assert main(["bogus"]) == EXIT_USAGE
    assert main(["verify", "--config", str(tmp_path / "missing.ini")]) == EXIT_USAGE
    assert main(["verify", "--config", cfg, "--set", "run.n"]) == EXIT_USAGE
    assert main(["verify", "--config", cfg, "--set", "measure.name=nonsense"]) == EXIT_USAGE


def test_numeric_error_exit_code(tmp_path):
    # the slowly varying tail at t = 1e-4 is outside the reach of the E R_t quadrature
    rc = main(["er-rt", "--out", str(tmp_path), "-q", "--set", "measure.name=log_sv",
               "--set", "run.t=1e-4", "--set", "run.n=10"])
    assert rc == EXIT_NUMERIC


def test_shipped_configs_parse():
    from snlevy.experiment import ExperimentConfig

    root = os.path.join(os.path.dirname(__file__), "..", "configs")
    for name in sorted(os.listdir(root)):
        cfg = ExperimentConfig.from_ini(os.path.join(root, name))
        cfg.build_measure()
        cfg.build_weights()
