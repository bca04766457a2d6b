from __future__ import annotations

import pytest

from volterra_lab.cli import EXIT_CHECKS_FAILED, EXIT_INVALID, EXIT_OK, main

# x' = f(x) through a unit atom at 0: F(x(t)) = t up to the trapezoid error.
ODE = """
kernel.atoms = [[0, 1]]
nonlinearity.family = logtype
grid.T = 200
grid.dt = 0.1
"""

ENSEMBLE = """
kernel.density = exp(-s)
nonlinearity.family = power
nonlinearity.beta = 0.5
noise.kind = brownian
noise.sigma = 1
noise.seed = 11
noise.paths = 4
grid.T = 20
grid.dt = 0.05
"""


def _report(path) -> dict:
    out = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        k, _, v = line.partition(" = ")
        out[k] = v
    return out


def test_solve_writes_report_and_trajectory(tmp_path, config_file):
    out = tmp_path / "out"
    assert main(["solve", config_file(ODE), "--out", str(out)]) == EXIT_OK
    report = _report(out / "report.txt")
    assert report["regime"] == "ode_dominated"
    assert report["checks.clock_limit"] == "pass"
    assert report["mode"] == "deterministic"
    lines = (out / "trajectory.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "t,x,H,Z,M_t,clock_ratio,xh_ratio,xsigma_ratio"
    assert len(lines) - 1 <= 512


def test_full_dump_writes_every_grid_point(tmp_path, config_file):
    out = tmp_path / "out"
    assert main(["solve", config_file(ODE), "--out", str(out), "--full-dump"]) == EXIT_OK
    lines = (out / "trajectory.csv").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1 + 2001


def test_failed_check_exits_two(tmp_path, config_file, capsys):
    out = tmp_path / "out"
    path = config_file(ODE + "analysis.tolerance = 1e-12\n")
    assert main(["solve", path, "--out", str(out)]) == EXIT_CHECKS_FAILED
    assert _report(out / "report.txt")["checks.clock_limit"] == "fail"
    assert "failed: clock_limit" in capsys.readouterr().err


def test_invalid_config_exits_one_without_output(tmp_path, config_file, capsys):
    out = tmp_path / "out"
    assert main(["solve", config_file(ODE + "grid.bogus = 1\n"), "--out", str(out)]) == EXIT_INVALID
    assert "unknown key" in capsys.readouterr().err
    assert not out.exists()


def test_numerical_setup_failure_exits_one(tmp_path, config_file, capsys, monkeypatch):
    def stuck(text):
        raise RuntimeError("Failed to converge after 100 iterations")

    monkeypatch.setattr("volterra_lab.scenario.sigma_from_text", stuck)
    out = tmp_path / "out"
    assert main(["solve", config_file(ENSEMBLE), "--out", str(out)]) == EXIT_INVALID
    assert "cannot set up the run" in capsys.readouterr().err
    assert not out.exists()


def test_missing_config_exits_one(tmp_path):
    assert main(["solve", str(tmp_path / "none.cfg"), "--out", str(tmp_path)]) == EXIT_INVALID


def test_bad_seed_is_a_usage_error(config_file):
    with pytest.raises(SystemExit):
        main(["solve", config_file(ODE), "--seed", "-3"])


def test_unknown_example_is_a_usage_error():
    with pytest.raises(SystemExit):
        main(["reproduce", "nope"])


def test_convergence_command(tmp_path, config_file):
    out = tmp_path / "out"
    path = config_file("kernel.atoms = [[0, 1]]\nnonlinearity.family = logtype\ngrid.T = 5\ngrid.dt = 0.1\n")
    assert main(["convergence", path, "--out", str(out)]) == EXIT_OK
    report = _report(out / "convergence.txt")
    assert report["checks.order"] == "pass"
    assert report["levels"] == "4"
    assert 1.8 <= float(report["observed_order"]) <= 2.2


def test_convergence_rejects_stable_noise(tmp_path, config_file):
    path = config_file(ENSEMBLE.replace("noise.kind = brownian", "noise.kind = stable") + "analysis.envelope = (1 + t)**2\n")
    assert main(["convergence", path, "--out", str(tmp_path)]) == EXIT_INVALID


def test_ensemble_output_is_deterministic(tmp_path, config_file):
    path = config_file(ENSEMBLE)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["ensemble", path, "--out", str(a), "--workers", "1"]) in (EXIT_OK, EXIT_CHECKS_FAILED)
    assert main(["ensemble", path, "--out", str(b), "--workers", "2"]) in (EXIT_OK, EXIT_CHECKS_FAILED)
    assert (a / "ensemble.txt").read_bytes() == (b / "ensemble.txt").read_bytes()
    assert _report(a / "ensemble.txt")["paths"] == "4"


def test_seed_sources(tmp_path, config_file, monkeypatch):
    path = config_file(ENSEMBLE)
    monkeypatch.setenv("VOLTERRA_SEED", "77")
    main(["ensemble", path, "--out", str(tmp_path / "env"), "--workers", "1"])
    assert _report(tmp_path / "env" / "ensemble.txt")["seed"] == "77"
    main(["ensemble", path, "--out", str(tmp_path / "flag"), "--workers", "1", "--seed", "5"])
    assert _report(tmp_path / "flag" / "ensemble.txt")["seed"] == "5"


def test_ensemble_rejects_deterministic_config(tmp_path, config_file):
    assert main(["ensemble", config_file(ODE), "--out", str(tmp_path)]) == EXIT_INVALID
