from __future__ import annotations

import math

import numpy as np
import pytest

from volterra_lab.errors import HypothesisError, UnsupportedKernelError
from volterra_lab.forcing import (
    GOLDEN_A,
    Envelope,
    builtin_H,
    builtin_target,
    clock_envelope,
    example_forcing,
    expression_H,
    power_envelope,
    small_perturbation_ratio,
    validate_envelope,
)
from volterra_lab.kernel import Grid, exponential_kernel, point_mass
from volterra_lab.nonlinear import logtype, power
from volterra_lab.solver import solve_deterministic


def test_golden_constant():
    assert GOLDEN_A - math.sqrt(GOLDEN_A) == pytest.approx(1.0)


def test_builtin_forcings_vanish_at_zero():
    for name, params in [("log1p", ()), ("power", (1.5,)), ("exp_sqrt", (2.0,)), ("exp_power", (0.75,))]:
        H = builtin_H(name, params)
        assert H(np.array([0.0]))[0] == pytest.approx(0.0, abs=1e-12)
        assert H.positive


def test_builtin_forcing_parameter_errors():
    with pytest.raises(HypothesisError):
        builtin_H("power", ())
    with pytest.raises(HypothesisError):
        builtin_H("exp_sqrt", (-1.0,))
    with pytest.raises(HypothesisError):
        builtin_H("nope")


def test_expression_forcing_must_vanish_at_zero():
    assert expression_H("t**2").positive
    with pytest.raises(HypothesisError):
        expression_H("1 + t")


def test_example_forcing_reproduces_target():
    n = logtype()
    target = builtin_target("exp_sqrt", (2.0,))
    grid = Grid.from_horizon(20.0, 0.01)
    H = example_forcing(n, target, exponential_kernel(), grid)
    psi = float(target(np.array([0.0]))[0])
    traj = solve_deterministic(exponential_kernel(), n, H, psi, grid)
    np.testing.assert_allclose(traj.values, target(grid.times), rtol=1e-9)


def test_example_forcing_needs_exponential_kernel():
    with pytest.raises(UnsupportedKernelError):
        example_forcing(power(0.5), builtin_target("golden"), point_mass(), Grid.from_horizon(10.0, 0.1))


def test_example_forcing_rejects_bounded_target():
    with pytest.raises(HypothesisError):
        example_forcing(power(0.5), lambda t: 1.0 - np.exp(-t), exponential_kernel(), Grid.from_horizon(50.0, 0.1))


def test_example_forcing_table_stops_at_overflow():
    grid = Grid.from_horizon(4000.0, 1.0)
    H = example_forcing(logtype(), builtin_target("exp_power", (0.75,)), exponential_kernel(), grid)
    assert 2900.0 < H.horizon < 3200.0
    assert math.isnan(H(np.array([3500.0]))[0])


def test_clock_envelope_power():
    env = clock_envelope(power(0.5), 1.0, 2.0)
    t = np.array([0.0, 3.0, 100.0])
    np.testing.assert_allclose(env(t), (1.0 + t) ** 2)
    assert env.role == "gamma_plus"


def test_envelope_role_checked():
    with pytest.raises(HypothesisError):
        Envelope(lambda t: t, role="upper")


def test_validate_envelope():
    validate_envelope(power_envelope(0.5), 1e4)
    with pytest.raises(HypothesisError):
        validate_envelope(power_envelope(0.5, scale=-1.0), 1e4)


def test_small_perturbation_ratio_vanishes_for_log_forcing():
    r = small_perturbation_ratio(np.log1p, power(0.5), 1.0, 0.1, np.array([10.0, 1e4]))
    assert r[1] < r[0] < 1.0
