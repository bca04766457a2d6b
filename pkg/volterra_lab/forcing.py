"""
Deterministic forcing terms H(t) = int_0^t h(s) ds and envelope functions.

Besides closed-form forcings this module reverse-engineers forcings from a
target solution: given x(t), the H that makes x solve
x = x(0) + int M(t-s) f(x(s)) ds + H is tabulated on the solver's own grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import HypothesisError, UnsupportedKernelError
from .expr import compile_expr
from .kernel import Grid, MeasureKernel, exponential_form, grid_weights
from .nonlinear import Nonlinearity, invert_F

GOLDEN_A = (3.0 + math.sqrt(5.0)) / 2.0

# Targets above this are treated as overflow; f(x) and the convolution need headroom.
_TABLE_CEILING = 1e300


@dataclass(frozen=True, eq=False)
class ForcingTerm:
    name: str
    H: Callable[[np.ndarray], np.ndarray]
    h: Optional[Callable[[np.ndarray], np.ndarray]] = None
    positive: bool = False
    # (times, values) when H is tabulated on a grid
    table: Optional[tuple[np.ndarray, np.ndarray]] = None

    def __call__(self, t):
        return np.asarray(self.H(np.asarray(t, dtype=float)), dtype=float)

    @property
    def is_zero(self) -> bool:
        return self.name == "zero"

    @property
    def horizon(self) -> float:
        """Last time H is known; nan beyond it."""
        return float(self.table[0][-1]) if self.table is not None else math.inf


def zero_forcing() -> ForcingTerm:
    return ForcingTerm(name="zero", H=np.zeros_like, h=np.zeros_like, positive=True)


def _exp_sqrt(L: float):
    def H(t):
        return np.exp(np.sqrt(2.0 * L * (t + 1.0))) - math.exp(math.sqrt(2.0 * L))

    def h(t):
        p = np.sqrt(2.0 * L * (t + 1.0))
        return np.exp(p) * L / p

    return H, h


def _exp_power(alpha: float):
    def H(t):
        return np.exp((2.0 * (t + 1.0)) ** alpha) - math.exp(2.0**alpha)

    def h(t):
        u = 2.0 * (t + 1.0)
        return np.exp(u**alpha) * 2.0 * alpha * u ** (alpha - 1.0)

    return H, h


def builtin_H(name: str, params=()) -> ForcingTerm:
    """
    Closed-form forcings: zero, log1p, power(p), exp_sqrt(L), exp_power(alpha).

    exp_sqrt and exp_power are shifted by their value at t=0 so that H(0) = 0;
    the shift does not change any growth rate.
    """
    params = tuple(float(p) for p in params)

    def need(count: int) -> tuple[float, ...]:
        if len(params) != count:
            raise HypothesisError(f"forcing {name!r} takes {count} parameter(s), got {len(params)}")
        return params

    if name == "zero":
        need(0)
        return zero_forcing()
    if name == "log1p":
        need(0)
        return ForcingTerm(name="log1p", H=np.log1p, h=lambda t: 1.0 / (1.0 + t), positive=True)
    if name == "power":
        (p,) = need(1)
        if p <= 0:
            raise HypothesisError(f"power forcing needs p > 0, got {p!r}")
        return ForcingTerm(name=f"power({p:g})", H=lambda t: t**p, h=lambda t: p * t ** (p - 1.0), positive=True)
    if name == "exp_sqrt":
        (L,) = need(1)
        if L <= 0:
            raise HypothesisError(f"exp_sqrt forcing needs L > 0, got {L!r}")
        H, h = _exp_sqrt(L)
        return ForcingTerm(name=f"exp_sqrt({L:g})", H=H, h=h, positive=True)
    if name == "exp_power":
        (a,) = need(1)
        if a <= 0:
            raise HypothesisError(f"exp_power forcing needs alpha > 0, got {a!r}")
        H, h = _exp_power(a)
        return ForcingTerm(name=f"exp_power({a:g})", H=H, h=h, positive=True)
    raise HypothesisError(f"unknown builtin forcing: {name!r}")


def expression_H(text: str, sample_horizon: float = 1e4) -> ForcingTerm:
    ex = compile_expr(text, ("t",))
    h0 = float(ex(0.0))
    if not math.isfinite(h0) or abs(h0) > 1e-12:
        raise HypothesisError(f"forcing {text!r} must vanish at t=0 (got {h0!r})")
    samples = np.linspace(0.0, sample_horizon, 2001)
    vals = np.asarray(ex(samples), dtype=float)
    return ForcingTerm(name=f"expr({ex.text})", H=lambda t: ex(t), positive=bool(np.all(vals >= 0)))


# Target solutions used by the example harness.
def _target_golden(A: float = GOLDEN_A, beta: float = 0.5):
    q = 1.0 - beta
    return lambda t: A * (q * np.asarray(t, dtype=float)) ** (1.0 / q)


def _target_exp_sqrt(L: float):
    return lambda t: np.exp(np.sqrt(2.0 * L * (np.asarray(t, dtype=float) + 1.0))) - math.e


def _target_exp_power(alpha: float):
    return lambda t: np.exp((2.0 * (np.asarray(t, dtype=float) + 1.0)) ** alpha) - math.e


def _target_exp_lambda(alpha: float):
    def x(t):
        t = np.asarray(t, dtype=float)
        return np.exp((1.0 + t) ** alpha + np.sqrt(2.0 * (t + 1.0))) - math.e

    return x


TARGETS: dict[str, Callable[..., Callable[[np.ndarray], np.ndarray]]] = {
    "golden": _target_golden,
    "exp_sqrt": _target_exp_sqrt,
    "exp_power": _target_exp_power,
    "exp_lambda": _target_exp_lambda,
}


def builtin_target(name: str, params=()) -> Callable[[np.ndarray], np.ndarray]:
    try:
        build = TARGETS[name]
    except KeyError:
        raise HypothesisError(f"unknown target: {name!r}") from None
    try:
        return build(*(float(p) for p in params))
    except TypeError as e:
        raise HypothesisError(f"target {name!r}: bad parameters {list(params)!r}") from e


def example_forcing(
    n: Nonlinearity,
    target: Callable[[np.ndarray], np.ndarray],
    kernel: MeasureKernel,
    grid: Grid,
    name: str = "example",
) -> ForcingTerm:
    """
    H(t) = x(t) - x(0) - int_0^t M(t-s) f(x(s)) ds for the target x, evaluated
    with the product quadrature the solver uses on `grid`. H is linear between
    grid points and nan past the last point where the target is representable.
    """
    if kernel.density is None or kernel.density.exp_form is None or exponential_form(kernel) is None:
        raise UnsupportedKernelError("example forcing is only defined for the exponential kernel")
    times = grid.times
    with np.errstate(over="ignore", invalid="ignore"):
        x = np.asarray(target(times), dtype=float)
    ok = np.isfinite(x) & (np.abs(x) <= _TABLE_CEILING)
    stop = int(np.argmin(ok)) if not ok.all() else x.size
    if stop < 3:
        raise HypothesisError("target is not representable on the grid")
    times, x = times[:stop], x[:stop]

    if x[0] < 0 or np.any(np.diff(x) < 0):
        raise HypothesisError("target must be nonnegative and nondecreasing")
    half = x.size // 2
    scale = max(1.0, abs(x[-1]))
    if x[-1] - x[half] <= 1e-9 * scale:
        raise HypothesisError("target must keep increasing (bounded or constant targets are rejected)")

    w = grid_weights(kernel, Grid(dt=grid.dt, n=x.size - 1))
    with np.errstate(over="ignore", invalid="ignore"):
        g = np.asarray(n.f(x), dtype=float)
        values = x - x[0] - w.convolve(g)
    values[0] = 0.0

    def H(t):
        return np.interp(t, times, values, right=np.nan)

    return ForcingTerm(name=name, H=H, positive=bool(np.all(values >= 0)), table=(times, values))


@dataclass(frozen=True, eq=False)
class Envelope:
    gamma: Callable[[np.ndarray], np.ndarray]
    role: str = "gamma"
    # gamma(t) = scale*(1+t)**power when set
    power: Optional[float] = None
    scale: float = 1.0
    label: str = ""

    ROLES = ("gamma", "gamma_plus", "gamma_minus")

    def __post_init__(self) -> None:
        if self.role not in self.ROLES:
            raise HypothesisError(f"envelope role must be one of {self.ROLES}, got {self.role!r}")

    def __call__(self, t):
        with np.errstate(over="ignore"):
            return self.scale * np.asarray(self.gamma(np.asarray(t, dtype=float)), dtype=float)


def power_envelope(eps: float, role: str = "gamma", scale: float = 1.0) -> Envelope:
    if eps <= 0:
        raise HypothesisError(f"power envelope needs eps > 0, got {eps!r}")
    return Envelope(lambda t: (1.0 + t) ** eps, role=role, power=float(eps), scale=scale, label=f"(1+t)**{eps:g}")


def clock_envelope(n: Nonlinearity, M: float, alpha: float) -> Envelope:
    """gamma_plus(t) = F^{-1}(alpha M t)."""
    if alpha <= 0:
        raise HypothesisError(f"clock envelope needs alpha > 0, got {alpha!r}")

    def gamma(t):
        t = np.asarray(t, dtype=float)
        if n.Finv_closed is not None:
            return np.asarray(n.Finv_closed(alpha * M * t), dtype=float)
        return np.vectorize(lambda s: invert_F(n, alpha * M * s))(t)

    return Envelope(gamma, role="gamma_plus", label=f"Finv({alpha:g}*M*t)")


def expression_envelope(text: str, role: str = "gamma") -> Envelope:
    ex = compile_expr(text, ("t",))
    return Envelope(lambda t: ex(t), role=role, label=ex.text)


def validate_envelope(env: Envelope, horizon: float) -> None:
    t = np.geomspace(1e-3, float(horizon), 400)
    vals = env(t)
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
        raise HypothesisError(f"envelope {env.label!r} must be positive and finite on (0, {horizon:g}]")
    if np.any(np.diff(vals) < 0):
        raise HypothesisError(f"envelope {env.label!r} must be increasing")
    if vals[-1] <= 2.0 * vals[0]:
        raise HypothesisError(f"envelope {env.label!r} does not grow over the horizon")


def small_perturbation_ratio(H, n: Nonlinearity, M: float, eps: float, times) -> np.ndarray:
    """H(t) / F^{-1}(M(1+eps)t); tending to 0 keeps the unperturbed growth rate."""
    times = np.asarray(times, dtype=float)
    if n.Finv_closed is not None:
        with np.errstate(over="ignore"):
            denom = np.asarray(n.Finv_closed(M * (1.0 + eps) * times), dtype=float)
    else:
        denom = np.array([invert_F(n, M * (1.0 + eps) * s) for s in times])
    return np.asarray(H(times), dtype=float) / denom
