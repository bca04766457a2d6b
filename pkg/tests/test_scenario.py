from __future__ import annotations

import math

import numpy as np
import pytest

from volterra_lab.asymptotics import FORCING, ODE, PASS
from volterra_lab.config import load_scenario, parse
from volterra_lab.errors import ConfigError, HypothesisError, OutOfRangeError, VolterraError
from volterra_lab.scenario import analyse, analytic_part, build_scenario, run_path, trajectory_rows

ODE_RUN = """
kernel.density = exp(-s)
nonlinearity.family = power
nonlinearity.beta = 0.5
grid.T = 2000
grid.dt = 0.1
analysis.tolerance = 0.1
"""

BROWNIAN_RUN = """
kernel.density = exp(-s)
nonlinearity.family = power
nonlinearity.beta = 0.5
noise.kind = brownian
noise.sigma = 1
noise.seed = 11
grid.T = 20
grid.dt = 0.05
"""


def test_build_resolves_mode_and_mass():
    sc = build_scenario(parse(ODE_RUN))
    assert sc.mode == "deterministic"
    assert sc.M == pytest.approx(1.0)
    assert sc.forcing.is_zero
    assert sc.psi == 1.0
    assert sc.grid.n == 20000
    assert build_scenario(parse(BROWNIAN_RUN)).mode == "brownian"
    env = build_scenario(parse(ODE_RUN + "analysis.envelope_clock = 2\n"))
    assert env.mode == "envelope" and env.envelope is not None


def test_auto_psi_uses_target_at_zero():
    cfg = parse(
        """
        kernel.density = exp(-s)
        nonlinearity.family = logtype
        forcing.kind = example
        forcing.name = exp_sqrt
        forcing.params = [2]
        grid.T = 20
        grid.dt = 0.1
        run.psi = auto
        """
    )
    sc = build_scenario(cfg)
    assert sc.psi == pytest.approx(float(sc.target(np.array([0.0]))[0]))
    assert sc.psi > 0


@pytest.mark.parametrize(
    "extra,error",
    [
        ("analysis.mode = envelope", ConfigError),
        ("analysis.mode = brownian", ConfigError),
        ("noise.kind = stable\nnoise.alpha = 2.5\nanalysis.envelope = (1 + t)**2", OutOfRangeError),
        ("noise.kind = stable\nnoise.skew = 2\nanalysis.envelope = (1 + t)**2", OutOfRangeError),
        ("noise.kind = brownian\nanalysis.mode = stable\nanalysis.envelope = 1 + t", ConfigError),
        ("forcing.kind = builtin\nforcing.name = nope", HypothesisError),
        ("analysis.envelope = 1/(1 + t)", HypothesisError),
        ("analysis.envelope = 1 + 0*t", HypothesisError),
    ],
)
def test_build_rejects_inconsistent_configs(extra, error):
    with pytest.raises(error):
        build_scenario(parse(ODE_RUN + extra + "\n"))


def test_build_checks_declared_custom_hypotheses():
    cfg = parse(
        """
        kernel.density = exp(-s)
        nonlinearity.family = custom
        nonlinearity.f = x + 1
        nonlinearity.phi = x + 1
        nonlinearity.phi_prime = 1 + 0*x
        nonlinearity.flags = ["positive", "a4"]
        grid.T = 20
        grid.dt = 0.1
        """
    )
    with pytest.raises(HypothesisError, match=r"\(A4\)"):
        build_scenario(cfg)


def test_power_sigma_scenario_builds():
    sc = build_scenario(load_scenario("stoch1"))
    assert sc.sigma.guard_time == pytest.approx((5.0 * math.e) ** 0.2)
    assert sc.sigma.hold_time == pytest.approx((5.0 * math.exp(math.e)) ** 0.2)


def test_numerical_failure_while_building_is_a_volterra_error(monkeypatch):
    def boom(text):
        raise RuntimeError("Failed to converge after 100 iterations")

    monkeypatch.setattr("volterra_lab.scenario.sigma_from_text", boom)
    with pytest.raises(VolterraError, match="converge"):
        build_scenario(parse(BROWNIAN_RUN))


def test_zero_forcing_run_is_ode_dominated():
    sc = build_scenario(parse(ODE_RUN))
    traj = run_path(sc)
    report = analyse(sc, traj)
    assert report.L.value == 0.0
    assert report.regime == ODE
    assert report.theorems == ("ode_rate_retained",)
    assert report.check("clock_limit").status == PASS
    assert report.check("x_over_H_diverges").status == "n/a"
    assert "clock_ratio" in report.tails
    assert report.horizon == pytest.approx(2000.0)
    assert report.notes["forcing"] == "zero forcing: L = 0"
    assert float(report.notes["F_over_Phi"].split()[0]) == pytest.approx(1.0)
    assert "x_over_ode" in report.notes
    assert report.passed


def test_side_notes_for_forced_and_envelope_runs():
    forced = build_scenario(parse(ODE_RUN + "forcing.kind = builtin\nforcing.name = log1p\n"))
    notes = dict(analytic_part(forced).notes)
    assert float(notes["H_over_perturbed_ode"].split()[0]) < 1e-6
    env = build_scenario(parse(ODE_RUN + "analysis.envelope_clock = 2\n"))
    notes = dict(analytic_part(env).notes)
    assert float(notes["L_phi_clock"].split()[0]) == pytest.approx(2.0, rel=1e-6)


@pytest.mark.slow
def test_small_forcing_keeps_ode_growth_rate():
    cfg = parse(
        """
        kernel.density = exp(-s)
        nonlinearity.family = power
        nonlinearity.beta = 0.5
        forcing.kind = builtin
        forcing.name = log1p
        grid.T = 10000
        grid.dt = 0.05
        """
    )
    sc = build_scenario(cfg)
    report = analyse(sc, run_path(sc))
    assert report.regime == ODE
    assert report.check("clock_limit").status == PASS
    assert report.check("x_over_H_diverges").status == PASS
    assert report.passed


def test_overflowing_forcing_truncates_and_is_noted():
    cfg = parse(
        """
        kernel.density = exp(-s)
        nonlinearity.family = logtype
        forcing.kind = builtin
        forcing.name = exp_power
        forcing.params = [0.75]
        grid.T = 4000
        grid.dt = 1
        """
    )
    sc = build_scenario(cfg)
    traj = run_path(sc)
    report = analyse(sc, traj)
    assert report.truncated_at is not None
    assert report.horizon < report.truncated_at
    assert "truncated" in report.notes
    assert report.regime == FORCING


def test_brownian_paths_are_reproducible_per_stream():
    sc = build_scenario(parse(BROWNIAN_RUN))
    a, b, c = run_path(sc, 0), run_path(sc, 0), run_path(sc, 1)
    np.testing.assert_array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
    assert a.stochastic


def test_brownian_analysis_measures_sigma_ratio():
    sc = build_scenario(parse(BROWNIAN_RUN))
    analytic = analytic_part(sc)
    assert analytic.L.flag == "zero"
    report = analyse(sc, run_path(sc, 0), analytic)
    assert report.mode == "brownian"
    assert "x_over_sigma" in report.tails
    assert "x_over_sigma" in report.traces
    assert "unbounded" in {c.name for c in report.checks}


def test_trajectory_rows():
    sc = build_scenario(parse(BROWNIAN_RUN))
    traj = run_path(sc, 0)
    rows = trajectory_rows(sc, traj, np.array([0, 10, traj.values.size - 1]))
    assert len(rows) == 3 and all(len(r) == 8 for r in rows)
    t0, x0, H0, Z0, M0, clock0, xh0, _xs0 = rows[0]
    assert (t0, x0, H0, Z0, M0) == (0.0, 1.0, 0.0, 0.0, 0.0)
    assert math.isnan(clock0) and math.isnan(xh0)
    assert rows[-1][0] == pytest.approx(20.0)
    assert rows[-1][4] == pytest.approx(1.0 - math.exp(-20.0))
