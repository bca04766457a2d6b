"""
Turns a RunConfig into solver inputs, runs one path, and measures it.

`build_scenario` validates everything a run needs before any time stepping
starts, so configuration mistakes surface as exit code 1 and never leave
partial output behind.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .asymptotics import (
    ClassifyInputs,
    LEstimate,
    RatioTrace,
    RegimeReport,
    TailStats,
    TrendInputs,
    classify,
    clock_ratio,
    estimate_L,
    extrapolate_limit,
    phi_clock_ratio,
    sample_indices,
    tail_limsup,
)
from .config import RunConfig
from .debug import debug_log
from .errors import ConfigError, InsufficientHorizonError, OutOfRangeError, VolterraError
from .expr import compile_expr
from .forcing import (
    Envelope,
    ForcingTerm,
    builtin_H,
    builtin_target,
    clock_envelope,
    example_forcing,
    expression_envelope,
    expression_H,
    small_perturbation_ratio,
    validate_envelope,
    zero_forcing,
)
from .kernel import Grid, MeasureKernel, cumulative, density_from_text, tail_bound, total_mass
from .noise import (
    NoisePath,
    SigmaEnvelope,
    envelope_integrability,
    sample_brownian,
    sample_stable,
    sigma_from_text,
    square_integrable,
)
from .nonlinear import (
    Nonlinearity,
    clock_equivalence,
    custom,
    equivalence_preserved,
    eval_F_array,
    logtype,
    ode_comparison,
    power,
    validate,
    verify_declared,
)
from .solver import Trajectory, solve_deterministic, solve_stochastic

# Points per tail statistic on [T/2, T]; longer tails are strided.
TAIL_SAMPLES = 1 << 17


@dataclass(frozen=True, eq=False)
class Scenario:
    config: RunConfig
    kernel: MeasureKernel
    nonlinearity: Nonlinearity
    grid: Grid
    forcing: ForcingTerm
    psi: float
    M: float
    mode: str
    sigma: Optional[SigmaEnvelope] = None
    envelope: Optional[Envelope] = None
    target: Optional[Callable] = None
    warnings: tuple[str, ...] = ()


def _nonlinearity(cfg: RunConfig) -> Nonlinearity:
    spec = cfg.nonlinearity
    if spec.family == "power":
        return power(spec.beta)
    if spec.family == "logtype":
        return logtype()
    return custom(spec.f, spec.phi, spec.phi_prime or None, spec.flags, spec.K, spec.eta)


def _mode(cfg: RunConfig) -> str:
    a = cfg.analysis
    if a.mode != "auto":
        return a.mode
    if cfg.noise.kind == "brownian":
        return "brownian"
    if cfg.noise.kind == "stable":
        return "stable"
    if a.envelope or a.envelope_clock is not None:
        return "envelope"
    return "deterministic"


def build_scenario(cfg: RunConfig) -> Scenario:
    try:
        return _build(cfg)
    except VolterraError:
        raise
    except (RuntimeError, OverflowError, ZeroDivisionError, FloatingPointError) as e:
        raise VolterraError(f"cannot set up the run: {e}") from e


def _build(cfg: RunConfig) -> Scenario:
    kernel = MeasureKernel(
        atoms=cfg.kernel.atoms,
        density=density_from_text(cfg.kernel.density),
        density_cutoff=cfg.kernel.cutoff,
    )
    M = total_mass(kernel)
    n = _nonlinearity(cfg)
    warnings = tuple(validate(n))
    verify_declared(n)
    grid = Grid.from_horizon(cfg.grid.T, cfg.grid.dt)

    fs = cfg.forcing
    target = None
    if fs.kind == "zero":
        forcing = zero_forcing()
    elif fs.kind == "builtin":
        forcing = builtin_H(fs.name, fs.params)
    elif fs.kind == "custom-expr":
        forcing = expression_H(fs.expr, sample_horizon=cfg.grid.T)
    else:
        if fs.name:
            target = builtin_target(fs.name, fs.params)
            label = f"example({fs.name})"
        else:
            ex = compile_expr(fs.target, ("t",))
            target = lambda t: np.asarray(ex(np.asarray(t, dtype=float)), dtype=float)  # noqa: E731
            label = f"example({ex.text})"
        forcing = example_forcing(n, target, kernel, grid, name=label)

    psi = cfg.run.psi
    if psi == "auto":
        psi = float(np.asarray(target(np.array([0.0])))[0]) if target is not None else 1.0
    psi = float(psi)

    mode = _mode(cfg)
    a = cfg.analysis
    envelope = None
    if a.envelope_clock is not None:
        envelope = clock_envelope(n, M, a.envelope_clock)
    elif a.envelope:
        envelope = expression_envelope(a.envelope, role=a.envelope_role)
    if envelope is not None:
        validate_envelope(envelope, cfg.grid.T)
    if mode in {"envelope", "stable"} and envelope is None:
        raise ConfigError(f"analysis mode {mode!r} needs analysis.envelope or analysis.envelope_clock")

    sigma = None
    if cfg.noise.kind == "brownian":
        sigma = sigma_from_text(cfg.noise.sigma)
    elif cfg.noise.kind == "stable":
        nz = cfg.noise
        if not 0.0 < nz.alpha < 2.0:
            raise OutOfRangeError(f"noise.alpha must lie in (0, 2), got {nz.alpha!r}")
        if not -1.0 <= nz.skew <= 1.0:
            raise OutOfRangeError(f"noise.skew must lie in [-1, 1], got {nz.skew!r}")
        if not nz.scale > 0:
            raise OutOfRangeError(f"noise.scale must be positive, got {nz.scale!r}")
    if mode == "brownian" and sigma is None:
        raise ConfigError("analysis mode 'brownian' needs noise.kind = brownian")
    if mode == "stable" and cfg.noise.kind != "stable":
        raise ConfigError("analysis mode 'stable' needs noise.kind = stable")

    return Scenario(
        config=cfg,
        kernel=kernel,
        nonlinearity=n,
        grid=grid,
        forcing=forcing,
        psi=psi,
        M=M,
        mode=mode,
        sigma=sigma,
        envelope=envelope,
        target=target,
        warnings=warnings,
    )


def sample_noise(sc: Scenario, stream: int) -> Optional[NoisePath]:
    nz = sc.config.noise
    if nz.kind == "brownian":
        return sample_brownian(sc.sigma.sigma, sc.grid, nz.seed, stream)
    if nz.kind == "stable":
        return sample_stable(nz.alpha, nz.scale, nz.skew, sc.grid, nz.seed, stream)
    return None


def run_path(sc: Scenario, stream: int = 0) -> Trajectory:
    noise = sample_noise(sc, stream)
    if noise is None:
        return solve_deterministic(sc.kernel, sc.nonlinearity, sc.forcing, sc.psi, sc.grid)
    return solve_stochastic(sc.kernel, sc.nonlinearity, sc.forcing, noise, sc.psi, sc.grid)


@dataclass(frozen=True, eq=False)
class Analytic:
    """Path-independent parts of the analysis; computed once per ensemble worker."""

    L: LEstimate
    notes: tuple[tuple[str, str], ...] = ()
    sigma_square_integrable: bool = False
    integrable: Optional[bool] = None
    trend: Optional[TrendInputs] = None


def _L_horizon(sc: Scenario, fn) -> float:
    h = sc.config.l_horizon
    return min(h, fn.horizon) if isinstance(fn, ForcingTerm) else h


def _estimate(sc: Scenario, fn) -> LEstimate:
    a = sc.config.analysis
    return estimate_L(
        fn,
        sc.nonlinearity,
        sc.M,
        _L_horizon(sc, fn),
        inf_threshold=a.infinity_threshold,
        zero_threshold=a.zero_threshold,
    )


def _geometric_times(horizon: float, count: int = 24) -> np.ndarray:
    t = horizon / 2.0 ** np.arange(count)[::-1]
    return t[t >= 1.0]


def _side_notes(sc: Scenario) -> tuple[tuple[str, str], ...]:
    """Cross-checks reported next to the regime; they never change a check."""
    n = sc.nonlinearity
    notes: list[tuple[str, str]] = []
    try:
        if n.hypotheses.a4:
            notes.append(("F_over_Phi", f"{clock_equivalence(n):.6g} at x = 1e8"))
            notes.append(("phi_equivalence_drift", f"{equivalence_preserved(n):.3g} at x = 1e8"))
        if sc.envelope is not None and sc.mode in {"envelope", "stable"}:
            _trace, est = phi_clock_ratio(sc.envelope, n, sc.M, _geometric_times(sc.config.l_horizon))
            notes.append(("L_phi_clock", f"{est.value:.6g} ({est.flag})"))
        if sc.mode == "deterministic" and not sc.forcing.is_zero:
            t = _geometric_times(_L_horizon(sc, sc.forcing))
            r = small_perturbation_ratio(sc.forcing, n, sc.M, sc.config.analysis.tolerance, t)
            notes.append(("H_over_perturbed_ode", f"{float(r[-1]):.3g} at t = {t[-1]:g}"))
    except (VolterraError, ValueError, ArithmeticError) as e:
        debug_log(f"scenario: side note skipped: {e}")
    return tuple(notes)


def analytic_part(sc: Scenario) -> Analytic:
    an = _analytic(sc)
    return replace(an, notes=an.notes + _side_notes(sc))


def _analytic(sc: Scenario) -> Analytic:
    a = sc.config.analysis
    notes: list[tuple[str, str]] = []
    if sc.mode in {"envelope", "stable"}:
        L = _estimate(sc, sc.envelope)
        integrable = envelope_integrability(sc.envelope, sc.config.noise.alpha) == "finite" if sc.mode == "stable" else None
        return Analytic(L=L, integrable=integrable)

    if sc.mode == "deterministic":
        if sc.forcing.is_zero:
            return Analytic(L=LEstimate.exact(0.0), notes=(("forcing", "zero forcing: L = 0"),))
        return Analytic(L=_estimate(sc, sc.forcing))

    # brownian
    if square_integrable(sc.sigma):
        return Analytic(L=LEstimate.exact(0.0), sigma_square_integrable=True)
    L = _estimate(sc, sc.sigma.extended)
    trend = None
    if not sc.forcing.is_zero:
        times = _geometric_times(_L_horizon(sc, sc.forcing))
        times = times[times >= sc.sigma.hold_time]
        with np.errstate(all="ignore"):
            ratio = np.asarray(sc.sigma.extended(times), dtype=float) / np.asarray(sc.forcing(times), dtype=float)
        trend = TrendInputs(
            ratio=extrapolate_limit(times, ratio, a.infinity_threshold, a.zero_threshold),
            L_H0=_estimate(sc, sc.forcing),
        )
        notes.append(("trend", f"Sigma/H0 limit flagged {trend.ratio.flag}"))
    return Analytic(L=L, notes=tuple(notes), trend=trend)


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    with np.errstate(all="ignore"):
        return np.where(np.isfinite(den) & (den != 0), num / den, np.nan)


def _tail_or_none(name: str, t: np.ndarray, v: np.ndarray) -> Optional[TailStats]:
    try:
        return tail_limsup(RatioTrace(name, t, v))
    except ValueError:
        return None


def analyse(sc: Scenario, traj: Trajectory, analytic: Optional[Analytic] = None) -> RegimeReport:
    a = sc.config.analysis
    an = analytic if analytic is not None else analytic_part(sc)
    n, M = sc.nonlinearity, sc.M
    times, x = traj.times, traj.values
    T = traj.horizon

    geo = sample_indices(times)
    tg = times[geo]
    k0 = int(np.searchsorted(times, T / 2.0))
    stride = max(1, (times.size - k0) // TAIL_SAMPLES)
    tail_idx = np.unique(np.append(np.arange(k0, times.size, stride), times.size - 1))
    tt, xt = times[tail_idx], x[tail_idx]

    clock_tr, clock_est = clock_ratio(traj, n, M)
    traces = {"clock_ratio": clock_tr}
    tails: dict[str, TailStats] = {}
    clock_tail = _tail_or_none("clock_ratio", tt, eval_F_array(n, np.abs(xt)) / (M * tt))
    if clock_tail is not None:
        tails["clock_ratio"] = clock_tail

    kw: dict = {}
    notes = dict(an.notes)
    if not sc.forcing.is_zero:
        H = traj.H
        xh_tr = RatioTrace("x_over_H", tg, _ratio(x[geo], H[geo]))
        traces["x_over_H"] = xh_tr
        name = "x_over_H0" if traj.stochastic else "x_over_H"
        tail = _tail_or_none(name, tt, _ratio(xt, H[tail_idx]))
        if tail is not None:
            tails[name] = tail
        if not traj.stochastic:
            try:
                kw["xh"] = extrapolate_limit(tg, xh_tr.values, a.infinity_threshold, a.zero_threshold)
            except InsufficientHorizonError:
                notes["x_over_H"] = "too few samples with H > 0"
            kw.update(xh_trace=xh_tr, xh_tail=tail)

    if sc.envelope is not None:
        with np.errstate(all="ignore"):
            g_geo = sc.envelope(tg)
            g_tail = sc.envelope(tt)
        xg_tr = RatioTrace("x_over_gamma", tg, _ratio(np.abs(x[geo]), g_geo))
        traces["x_over_gamma"] = xg_tr
        tail = _tail_or_none("x_over_gamma", tt, _ratio(np.abs(xt), g_tail))
        if tail is not None:
            tails["x_over_gamma"] = tail
        kw.update(envelope_role=sc.envelope.role, xg_trace=xg_tr, xg_tail=tail)
        gT = float(sc.envelope(np.array([T]))[0])
        kw["x_minus_h_last"] = abs(float(x[-1] - traj.H[-1])) / gT if gT > 0 else math.nan

    if sc.sigma is not None and traj.Z is not None:
        s_geo = sc.sigma.masked(tg)
        s_tail = sc.sigma.masked(tt)
        traces["x_over_sigma"] = RatioTrace("x_over_sigma", tg, _ratio(x[geo], s_geo))
        tail = _tail_or_none("x_over_sigma", tt, _ratio(xt, s_tail))
        if tail is None:
            notes["sigma"] = f"Sigma is undefined on [T/2, T] (qv > e only after t = {sc.sigma.guard_time:g})"
        else:
            tails["x_over_sigma"] = tail
        kw.update(xs_tail=tail, sigma_constant=sc.sigma.constant)
        sT = float(s_tail[-1]) if s_tail.size else math.nan
        if sc.forcing.is_zero and math.isfinite(sT) and sT > 0:
            kw["xzs_last"] = abs(float(x[-1] - traj.Z[-1])) / sT
    if traj.stochastic:
        kw["max_abs"] = float(np.max(np.abs(x)))

    trend = an.trend
    if trend is not None:
        trend = replace(trend, xh0_tail=tails.get("x_over_H0"))

    inputs = ClassifyInputs(
        mode=sc.mode,
        L=an.L,
        tolerance=a.tolerance,
        zero_threshold=a.zero_threshold,
        inf_threshold=a.infinity_threshold,
        clock=clock_est,
        clock_trace=clock_tr,
        clock_tail=clock_tail,
        sigma_square_integrable=an.sigma_square_integrable,
        integrable=an.integrable,
        trend=trend,
        traces=traces,
        tails=tails,
        **kw,
    )
    report = classify(inputs)
    for i, w in enumerate(sc.warnings):
        notes[f"hypothesis{i}"] = w
    if not traj.stochastic and sc.psi > 0:
        try:
            z = float(ode_comparison(n, M, sc.psi, np.array([T]))[0])
            notes["x_over_ode"] = f"{float(x[-1]) / z:.6g} at t = {T:g}"
        except (VolterraError, ValueError, ArithmeticError) as e:
            debug_log(f"scenario: no ODE comparison: {e}")
    kernel_tail = tail_bound(sc.kernel, T)
    if math.isfinite(kernel_tail):
        notes["kernel_tail"] = f"M - M(T) <= {kernel_tail:.3g}"
    if traj.truncated_at is not None:
        notes["truncated"] = f"overflow; diagnostics use the horizon t = {T:g}"
        debug_log(f"scenario: analysis on truncated horizon {T:g}")
    return replace(report, horizon=T, truncated_at=traj.truncated_at, notes={**report.notes, **notes})


def trajectory_rows(sc: Scenario, traj: Trajectory, indices: np.ndarray) -> list[list[float]]:
    """Rows of t, x, H, Z, M_t, clock_ratio, xh_ratio, xsigma_ratio; nan marks an empty field."""
    t = traj.times[indices]
    x = traj.values[indices]
    H = traj.H[indices]
    Z = traj.Z[indices] if traj.Z is not None else np.full(t.shape, np.nan)
    Mt = np.array([cumulative(sc.kernel, s) for s in t])
    with np.errstate(all="ignore"):
        clock = np.where(t > 0, eval_F_array(sc.nonlinearity, np.abs(x)) / (sc.M * t), np.nan)
    xh = np.full(t.shape, np.nan) if sc.forcing.is_zero else _ratio(x, H)
    xs = _ratio(x, sc.sigma.masked(t)) if sc.sigma is not None else np.full(t.shape, np.nan)
    return np.column_stack([t, x, H, Z, Mt, clock, xh, xs]).tolist()
