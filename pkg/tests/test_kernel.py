from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import integrate

from volterra_lab.errors import InvalidKernelError
from volterra_lab.kernel import (
    Grid,
    MeasureKernel,
    cumulative,
    density_from_text,
    exponential_density,
    exponential_form,
    exponential_kernel,
    grid_weights,
    inverse_square_density,
    point_mass,
    tail_bound,
    total_mass,
)


def test_cumulative_point_mass():
    assert cumulative(point_mass(1.0), 5.0) == 1.0


def test_cumulative_exponential_density():
    assert cumulative(exponential_kernel(), 2.0) == pytest.approx(1.0 - math.exp(-2.0), rel=1e-12)


def test_cumulative_atom_not_yet_reached():
    k = exponential_kernel(atoms=((1.0, 0.5),))
    assert cumulative(k, 0.5) == pytest.approx(1.0 - math.exp(-0.5), rel=1e-12)
    assert cumulative(k, 2.0) == pytest.approx(1.5 - math.exp(-2.0), rel=1e-12)


def test_cumulative_rejects_negative_time():
    with pytest.raises(InvalidKernelError):
        cumulative(point_mass(), -1.0)


def test_total_mass():
    assert total_mass(exponential_kernel(2.0, 4.0)) == pytest.approx(0.5)
    assert total_mass(point_mass(2.0)) == 2.0


def test_zero_and_negative_mass_rejected():
    with pytest.raises(InvalidKernelError):
        total_mass(MeasureKernel(atoms=((0.0, 0.0),)))
    with pytest.raises(InvalidKernelError):
        MeasureKernel(atoms=((0.0, -1.0),))
    with pytest.raises(InvalidKernelError):
        MeasureKernel(density=density_from_text("-exp(-s)"), density_cutoff=10.0)


def test_density_parsing():
    assert density_from_text("none") is None
    assert density_from_text("exp(-s)").exp_form == (1.0, 1.0)
    assert density_from_text("2*exp(-3*s)").exp_form == (2.0, 3.0)
    assert density_from_text("inverse_square").total == 1.0


def test_expression_density_needs_cutoff():
    d = density_from_text("1/(1+s)**3")
    with pytest.raises(InvalidKernelError):
        MeasureKernel(density=d)
    k = MeasureKernel(density=d, density_cutoff=50.0)
    assert total_mass(k) == pytest.approx(0.5 * (1.0 - 1.0 / 51.0**2), rel=1e-8)


def test_tail_bound_exponential():
    assert tail_bound(exponential_kernel(), 10.0) == pytest.approx(math.exp(-10.0))


def test_exponential_form_detection():
    assert exponential_form(exponential_kernel()) is not None
    assert exponential_form(point_mass()) is not None
    assert exponential_form(point_mass(1.0, at=2.0)) is None
    assert exponential_form(MeasureKernel(density=exponential_density(), density_cutoff=30.0)) is None


def test_convolution_of_constant_is_exact():
    grid = Grid.from_horizon(10.0, 0.05)
    w = grid_weights(exponential_kernel(), grid)
    t = grid.times
    np.testing.assert_allclose(w.convolve(np.ones(t.size)), t - 1.0 + np.exp(-t), atol=1e-12)


def test_recursion_matches_generic_weights():
    grid = Grid.from_horizon(10.0, 0.05)
    w = grid_weights(exponential_kernel(1.5, 0.7, atoms=((0.0, 0.3),)), grid)
    assert w.recursion_ok
    g = np.sin(grid.times) + grid.times
    fast = w.convolve(g)
    slow = replace(w, recursion=None).convolve(g)
    np.testing.assert_allclose(fast, slow, rtol=1e-10, atol=1e-12)


def test_grid_validation():
    with pytest.raises(InvalidKernelError):
        Grid.from_horizon(10.0, 0.0)
    g = Grid.from_horizon(1.0, 0.1)
    assert g.n == 10
    assert g.refine(2).n == 20


def test_unit_atom_at_zero_gives_trapezoid_weights():
    grid = Grid.from_horizon(1.0, 0.1)
    w = grid_weights(point_mass(), grid)
    assert w.recursion_ok
    assert w.lag[0] == pytest.approx(0.05)
    np.testing.assert_allclose(w.lag[1:], 0.1, rtol=1e-12)
    np.testing.assert_allclose(w.end[1:], 0.05, rtol=1e-12)
    g = np.cos(grid.times)
    want = integrate.cumulative_trapezoid(g, dx=0.1, initial=0.0)
    np.testing.assert_allclose(replace(w, recursion=None).convolve(g), want, atol=1e-14)
    np.testing.assert_allclose(w.convolve(g), want, atol=1e-14)


def test_recursion_flag_only_for_exponential_shapes():
    grid = Grid.from_horizon(1.0, 0.1)
    assert grid_weights(exponential_kernel(atoms=((0.0, 0.5),)), grid).recursion_ok
    assert not grid_weights(MeasureKernel(density=inverse_square_density()), grid).recursion_ok
    assert not grid_weights(point_mass(1.0, at=0.3), grid).recursion_ok


def test_generic_weights_are_second_order():
    kernel = MeasureKernel(density=inverse_square_density())
    T = 2.0
    # M(u) = u/(1+u)
    want, _err = integrate.quad(lambda s: (T - s) / (1.0 + T - s) * math.cos(s), 0.0, T, epsabs=1e-14, epsrel=1e-13)
    steps = [0.1, 0.05, 0.025, 0.0125]
    errors = []
    for dt in steps:
        grid = Grid.from_horizon(T, dt)
        w = grid_weights(kernel, grid)
        errors.append(abs(w.convolve(np.cos(grid.times))[-1] - want))
    slope = np.polyfit(np.log(steps), np.log(errors), 1)[0]
    assert 1.8 <= slope <= 2.2
