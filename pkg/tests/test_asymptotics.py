from __future__ import annotations

import math
from types import SimpleNamespace

import numpy as np
import pytest

from volterra_lab.asymptotics import (
    FAIL,
    FINITE,
    FORCING,
    HIGH,
    INDETERMINATE,
    INFINITE,
    NA,
    ODE,
    PASS,
    REGIMES,
    ZERO,
    Check,
    ClassifyInputs,
    LEstimate,
    RatioTrace,
    TailStats,
    bounds,
    classify,
    clock_ratio,
    estimate_L,
    extrapolate_limit,
    phi_clock_ratio,
    regime_for,
    sample_indices,
    tail_limsup,
)
from volterra_lab.errors import InsufficientHorizonError
from volterra_lab.nonlinear import logtype, power

TIMES = np.geomspace(1.0, 1e8, 24)


def _tail(hi: float, lo: float) -> TailStats:
    return TailStats(hi, lo, (hi,) * 8, (lo,) * 8)


def test_extrapolates_inverse_sqrt_corrections():
    est = extrapolate_limit(TIMES, 2.0 + 3.0 / np.sqrt(TIMES))
    assert est.flag == FINITE
    assert est.value == pytest.approx(2.0, abs=1e-6)
    assert est.lo <= 2.0 <= est.hi


def test_flags_threshold_crossings():
    assert extrapolate_limit(TIMES, TIMES).flag == INFINITE
    assert extrapolate_limit(TIMES, 1.0 / TIMES).flag == ZERO


def test_flags_power_law_drift_below_thresholds():
    t = np.geomspace(1.0, 1e4, 16)
    est = extrapolate_limit(t, t**0.3)
    assert est.flag == INFINITE and math.isinf(est.value)
    assert extrapolate_limit(t, t**-0.3).flag == ZERO


def test_trailing_infinity_is_infinite():
    r = np.array([1.0, 2.0, 3.0, np.inf])
    assert extrapolate_limit(np.arange(1.0, 5.0), r).flag == INFINITE


def test_too_few_points():
    with pytest.raises(InsufficientHorizonError):
        extrapolate_limit([1.0, 2.0, 3.0], [1.0, 1.0, 1.0])


def _power_gamma(c: float):
    return lambda t: c * np.asarray(t, dtype=float) ** 2


def _logtype_gamma(L: float):
    return lambda t: np.exp(np.sqrt(2.0 * L * (np.asarray(t, dtype=float) + 1.0))) - math.e


def _envelope_gamma(eps: float):
    return lambda t: (1.0 + np.asarray(t, dtype=float)) ** eps


ORACLES = [
    # (nonlinearity, gamma, horizon, expected L)
    ("power c=1/4", power(0.5), _power_gamma(0.25), 1e6, 1.0),
    ("power c=1", power(0.5), _power_gamma(1.0), 1e6, 2.0),
    ("power c=4", power(0.5), _power_gamma(4.0), 1e6, 4.0),
    ("logtype L=1.5", logtype(), _logtype_gamma(1.5), 1e3, 1.5),
    ("logtype L=2", logtype(), _logtype_gamma(2.0), 1e3, 2.0),
    ("logtype L=4", logtype(), _logtype_gamma(4.0), 1e3, 4.0),
    ("envelope beta=0.5 eps=2", power(0.5), _envelope_gamma(2.0), 1e6, 2.0),
    ("envelope beta=0.9 eps=2", power(0.9), _envelope_gamma(2.0), 1e6, 0.0),
    ("envelope beta=0.5 eps=4", power(0.5), _envelope_gamma(4.0), 1e6, math.inf),
    ("envelope beta=0.9 eps=20", power(0.9), _envelope_gamma(20.0), 1e6, math.inf),
    ("logtype exp_power", logtype(), lambda t: np.exp((2.0 * (np.asarray(t) + 1.0)) ** 0.75) - math.e, 3000.0, math.inf),
    ("power log1p", power(0.5), lambda t: np.log1p(np.asarray(t, dtype=float)), 1e6, 0.0),
]


@pytest.mark.parametrize("label,n,gamma,horizon,expected", ORACLES, ids=[o[0] for o in ORACLES])
def test_estimate_L_oracles(label, n, gamma, horizon, expected):
    est = estimate_L(gamma, n, 1.0, horizon)
    if math.isinf(expected):
        assert est.flag == INFINITE
    elif expected == 0.0:
        assert est.flag == ZERO
    else:
        assert est.flag == FINITE
        assert est.value == pytest.approx(expected, rel=0.02)


def test_estimate_L_scales_with_gamma_for_power_family():
    # r(t) for c*gamma is c**(1-beta) times r(t) for gamma.
    base = estimate_L(_power_gamma(1.0), power(0.5), 1.0, 1e6)
    scaled = estimate_L(_power_gamma(9.0), power(0.5), 1.0, 1e6)
    np.testing.assert_allclose(scaled.ratios, 3.0 * base.ratios, rtol=1e-8)


def test_estimate_L_needs_usable_horizon():
    with pytest.raises(InsufficientHorizonError):
        estimate_L(_power_gamma(1.0), power(0.5), 1.0, 8.0)


def test_phi_clock_ratio_agrees_with_estimate_L():
    gamma = _logtype_gamma(2.0)
    t = np.geomspace(10.0, 1e3, 12)
    _trace, est = phi_clock_ratio(gamma, logtype(), 1.0, t)
    assert est.value == pytest.approx(2.0, rel=0.02)


def test_sample_indices_geometric_and_unique():
    t = np.arange(0, 10001, dtype=float)
    idx = sample_indices(t)
    assert idx[-1] == 10000
    assert np.all(np.diff(idx) > 0)
    assert t[idx[0]] >= 1.0


def test_clock_ratio_on_ode_solution():
    t = np.arange(0.0, 10001.0)
    trace = SimpleNamespace(times=t, values=(1.0 + t / 2.0) ** 2)
    rt, est = clock_ratio(trace, power(0.5), 1.0)
    np.testing.assert_allclose(rt.values, 1.0)
    assert est.value == pytest.approx(1.0)


def test_tail_limsup_windows():
    t = np.linspace(0.0, 200.0, 20001)
    stats = tail_limsup(RatioTrace("sin", t, np.sin(t)))
    assert stats.limsup == pytest.approx(1.0, abs=1e-4)
    assert stats.liminf == pytest.approx(-1.0, abs=1e-4)
    assert len(stats.window_max) == 8
    with pytest.raises(ValueError):
        tail_limsup(RatioTrace("short", np.arange(6.0), np.ones(6)))


def test_tail_merge():
    a = TailStats(1.0, -1.0, (1.0, 0.5), (-1.0, -0.5))
    b = TailStats(2.0, -0.5, (0.2, 2.0), (-0.2, -0.5))
    m = a.merge(b)
    assert m.limsup == 2.0 and m.liminf == -1.0
    assert m.window_max == (1.0, 2.0)
    assert TailStats.merge_all([a, b]) == m
    assert TailStats.merge_all([]) is None
    with pytest.raises(ValueError):
        a.merge(_tail(1.0, 0.0))


def test_bounds_identities():
    assert bounds(2.0) == pytest.approx((1.5, 2.0))
    assert bounds(math.inf) == (1.0, 1.0)
    assert math.isinf(bounds(0.5)[1])
    for L in (1.5, 3.0, 10.0):
        g_l, g_u = bounds(L)
        assert g_u * (L - 1.0) == pytest.approx(L)
        assert (g_l - 1.0) * L == pytest.approx(1.0)


def test_regime_order_is_monotone_in_L():
    values = [0.0, 1e-4, 0.5, 0.99, 1.0, 1.5, 10.0, 1e4, math.inf]
    ranks = [REGIMES.index(regime_for(LEstimate.exact(v))) for v in values]
    assert ranks == sorted(ranks)
    assert regime_for(LEstimate(1.05, 0.9, 1.2)) == INDETERMINATE


def test_classify_intermediate_high():
    inp = ClassifyInputs(
        mode="deterministic",
        L=LEstimate.exact(2.0),
        clock_tail=_tail(2.0, 1.9),
        xh_tail=_tail(1.95, 1.9),
    )
    rep = classify(inp)
    assert rep.regime == HIGH
    assert (rep.G_L, rep.G_U) == pytest.approx((1.5, 2.0))
    assert "ratio_bounds" in rep.theorems
    assert rep.passed
    assert rep.check("x_over_H_upper").hi == pytest.approx(2.1)


def test_classify_flags_violated_bound():
    inp = ClassifyInputs(
        mode="deterministic",
        L=LEstimate.exact(2.0),
        clock_tail=_tail(2.0, 1.9),
        xh_tail=_tail(3.0, 1.9),
    )
    rep = classify(inp)
    assert rep.check("x_over_H_upper").status == FAIL
    assert not rep.passed


def test_classify_brownian_noise_dominates():
    inp = ClassifyInputs(
        mode="brownian",
        L=LEstimate.exact(math.inf),
        xs_tail=_tail(1.02, -0.98),
        xzs_last=0.01,
    )
    rep = classify(inp)
    assert rep.regime == FORCING
    assert rep.theorems == ("brownian_noise_dominates",)
    assert [c.status for c in rep.checks] == [PASS, PASS, PASS]


def test_classify_constant_noise_checks_unboundedness():
    inp = ClassifyInputs(
        mode="brownian",
        L=LEstimate.exact(0.0),
        clock_tail=_tail(0.9, 0.5),
        sigma_constant=True,
        max_abs=50.0,
    )
    rep = classify(inp)
    assert rep.regime == ODE
    assert rep.check("unbounded").status == PASS
    assert rep.check("clock_upper").status == PASS


def test_classify_missing_measurement_is_not_applicable():
    rep = classify(ClassifyInputs(mode="deterministic", L=LEstimate.exact(2.0)))
    assert rep.check("x_over_H_upper").status == NA
    assert rep.passed


def test_classify_rejects_unknown_mode():
    with pytest.raises(ValueError):
        classify(ClassifyInputs(mode="quantum", L=LEstimate.exact(1.0)))


def test_report_items_order():
    rep = classify(ClassifyInputs(mode="deterministic", L=LEstimate.exact(2.0)))
    keys = [k for k, _v in rep.items()]
    assert keys[:8] == ["L", "L_lo", "L_hi", "L_flag", "regime", "G_L", "G_U", "theorems"]
    assert "checks.clock_upper" in keys


def test_check_rejudged():
    c = Check("x", PASS, 1.0, 0.0, 2.0, "trace:limsup")
    assert c.rejudged(3.0).status == FAIL
    assert c.rejudged(3.0).source == "trace:limsup"
