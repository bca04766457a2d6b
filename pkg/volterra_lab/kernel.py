"""
Finite nonnegative memory measures on [0, inf) and their discretization.

A kernel is a list of point masses plus an optional absolutely continuous
density. Solvers never see the measure directly: they see M(t) = mu([0, t])
through the product-trapezoidal weights built by `grid_weights`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate, signal

from .errors import InvalidKernelError
from .expr import compile_expr

# Gauss-Legendre nodes/weights mapped to [0, 1]; order 8 is exact for the
# smooth densities used here up to rounding.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_Y = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W

_CHUNK = 1 << 16


@dataclass(frozen=True)
class Grid:
    """Uniform time grid t_k = k*dt, k = 0..n."""

    dt: float
    n: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise InvalidKernelError(f"grid step must be positive, got {self.dt!r}")
        if int(self.n) < 1:
            raise InvalidKernelError(f"grid needs at least one step, got n={self.n!r}")
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def from_horizon(cls, T: float, dt: float) -> "Grid":
        if not (math.isfinite(dt) and dt > 0):
            raise InvalidKernelError(f"grid step must be positive, got {dt!r}")
        return cls(dt=float(dt), n=max(1, int(round(float(T) / float(dt)))))

    @property
    def T(self) -> float:
        return self.dt * self.n

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n + 1, dtype=float) * self.dt

    def refine(self, factor: int = 2) -> "Grid":
        return Grid(dt=self.dt / factor, n=self.n * factor)


@dataclass(frozen=True)
class Density:
    label: str
    fn: Callable[[np.ndarray], np.ndarray]
    # int_0^t density, when known in closed form.
    integral: Optional[Callable[[float], float]] = None
    total: Optional[float] = None
    # density(s) = c * exp(-rate * s)
    exp_form: Optional[tuple[float, float]] = None
    # int_T^inf density
    tail: Optional[Callable[[float], float]] = None

    def __call__(self, s):
        return self.fn(s)


def exponential_density(coefficient: float = 1.0, rate: float = 1.0) -> Density:
    c = float(coefficient)
    lam = float(rate)
    if not (c >= 0 and lam > 0 and math.isfinite(c) and math.isfinite(lam)):
        raise InvalidKernelError(f"exponential density needs c >= 0 and rate > 0 (got c={c}, rate={lam})")
    label = "exp(-s)" if (c == 1.0 and lam == 1.0) else f"{c!r}*exp(-{lam!r}*s)"
    return Density(
        label=label,
        fn=lambda s: c * np.exp(-lam * np.asarray(s, dtype=float)),
        integral=lambda t: (c / lam) * -math.expm1(-lam * t),
        total=c / lam,
        exp_form=(c, lam),
        tail=lambda t: (c / lam) * math.exp(-lam * t),
    )


def inverse_square_density() -> Density:
    return Density(
        label="inverse_square",
        fn=lambda s: 1.0 / (1.0 + np.asarray(s, dtype=float)) ** 2,
        integral=lambda t: t / (1.0 + t),
        total=1.0,
        tail=lambda t: 1.0 / (1.0 + t),
    )


BUILTIN_DENSITIES: dict[str, Callable[[], Density]] = {
    "inverse_square": inverse_square_density,
}

_NUM = r"[0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?"
_EXP_RE = re.compile(
    rf"^\s*(?:(?P<c>{_NUM})\s*\*\s*)?exp\(\s*-\s*(?:(?P<rate>{_NUM})\s*\*\s*)?s\s*\)\s*$"
)


def density_from_text(text: str) -> Optional[Density]:
    """
    Parse a config density: "none", a builtin name, "c*exp(-rate*s)" (recognized
    so it keeps its closed forms), or any expression in s.
    """
    raw = str(text or "").strip()
    if raw.lower() in {"", "none"}:
        return None
    if raw in BUILTIN_DENSITIES:
        return BUILTIN_DENSITIES[raw]()
    m = _EXP_RE.match(raw)
    if m:
        return exponential_density(float(m.group("c") or 1.0), float(m.group("rate") or 1.0))
    ex = compile_expr(raw, ("s",))
    return Density(label=raw, fn=lambda s: np.asarray(ex(np.asarray(s, dtype=float)), dtype=float))


@dataclass(frozen=True)
class MeasureKernel:
    atoms: tuple[tuple[float, float], ...] = ()
    density: Optional[Density] = None
    density_cutoff: float = math.inf

    def __post_init__(self) -> None:
        atoms = tuple((float(a), float(m)) for a, m in self.atoms)
        for loc, mass in atoms:
            if not (math.isfinite(loc) and loc >= 0):
                raise InvalidKernelError(f"atom location must be a finite time >= 0, got {loc!r}")
            if not (math.isfinite(mass) and mass >= 0):
                raise InvalidKernelError(f"atom mass must be finite and >= 0, got {mass!r}")
        object.__setattr__(self, "atoms", atoms)
        cut = float(self.density_cutoff)
        if math.isnan(cut) or cut <= 0:
            raise InvalidKernelError(f"density cutoff must be positive, got {self.density_cutoff!r}")
        object.__setattr__(self, "density_cutoff", cut)
        if self.density is None:
            return
        if math.isinf(cut) and self.density.total is None:
            raise InvalidKernelError(
                f"density {self.density.label!r} has no closed-form tail integral; set a finite kernel.cutoff"
            )
        samples = np.linspace(0.0, min(cut, 50.0), 513)
        with np.errstate(all="ignore"):
            vals = np.asarray(self.density(samples), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise InvalidKernelError(f"density {self.density.label!r} is not finite on [0, {samples[-1]:g}]")
        if np.any(vals < 0):
            raise InvalidKernelError(f"density {self.density.label!r} takes negative values")

    @property
    def origin_mass(self) -> float:
        return sum(m for a, m in self.atoms if a == 0.0)


def point_mass(mass: float = 1.0, at: float = 0.0) -> MeasureKernel:
    return MeasureKernel(atoms=((at, mass),))


def exponential_kernel(coefficient: float = 1.0, rate: float = 1.0, atoms=()) -> MeasureKernel:
    return MeasureKernel(atoms=tuple(atoms), density=exponential_density(coefficient, rate))


def _density_integral(kernel: MeasureKernel, t: float) -> float:
    d = kernel.density
    if d is None or t <= 0:
        return 0.0
    upper = min(t, kernel.density_cutoff)
    if d.integral is not None:
        return float(d.integral(upper))
    val, _err = integrate.quad(lambda s: float(d(s)), 0.0, upper, epsabs=1e-13, epsrel=1e-10, limit=200)
    return float(val)


def cumulative(kernel: MeasureKernel, t: float) -> float:
    """M(t) = mu([0, t])."""
    t = float(t)
    if not t >= 0:
        raise InvalidKernelError(f"M(t) needs t >= 0, got {t!r}")
    atoms = sum(m for a, m in kernel.atoms if a <= t)
    return float(atoms + _density_integral(kernel, t))


def total_mass(kernel: MeasureKernel) -> float:
    atoms = sum(m for _a, m in kernel.atoms)
    d = kernel.density
    if d is None:
        dens = 0.0
    elif math.isinf(kernel.density_cutoff):
        dens = float(d.total) if d.total is not None else math.inf
    else:
        dens = _density_integral(kernel, kernel.density_cutoff)
    m = atoms + dens
    if not math.isfinite(m) or m <= 0:
        raise InvalidKernelError(f"kernel total mass must lie in (0, inf), got {m!r}")
    return float(m)


def tail_bound(kernel: MeasureKernel, T: float) -> float:
    """Declared bound on M - M(T); nan when the kernel cannot bound its tail."""
    beyond = sum(m for a, m in kernel.atoms if a > T)
    d = kernel.density
    if d is None or T >= kernel.density_cutoff:
        return float(beyond)
    if d.tail is not None:
        return float(beyond + d.tail(T))
    return math.nan


@dataclass(frozen=True)
class ExponentialForm:
    """M(u) = A - B*exp(-rate*u) for u >= 0."""

    A: float
    B: float
    rate: float

    def step_coefficients(self, dt: float) -> tuple[float, float, float]:
        """
        (decay, alpha, beta) with J_n = decay*J_{n-1} + alpha*g_{n-1} + beta*g_n for
        J_n = int_0^{t_n} exp(-rate*(t_n - s)) g(s) ds, g piecewise linear.
        """
        lam = self.rate
        z = lam * dt
        decay = math.exp(-z)
        if z < 1e-4:
            alpha = dt * (0.5 - z / 3.0 + z * z / 8.0 - z**3 / 30.0)
            beta = dt * (0.5 - z / 6.0 + z * z / 24.0 - z**3 / 120.0)
        else:
            alpha = (-math.expm1(-z) - z * decay) / (lam * z)
            beta = -math.expm1(-z) / lam - alpha
        return decay, alpha, beta

    def diagonal_weight(self, dt: float) -> float:
        _decay, _alpha, beta = self.step_coefficients(dt)
        return self.A * dt / 2.0 - self.B * beta


def exponential_form(kernel: MeasureKernel) -> Optional[ExponentialForm]:
    if any(a != 0.0 for a, _m in kernel.atoms):
        return None
    m0 = kernel.origin_mass
    d = kernel.density
    if d is None:
        return ExponentialForm(A=m0, B=0.0, rate=1.0)
    if d.exp_form is None or not math.isinf(kernel.density_cutoff):
        return None
    c, lam = d.exp_form
    return ExponentialForm(A=m0 + c / lam, B=c / lam, rate=lam)


@dataclass(frozen=True, eq=False)
class GridWeights:
    """
    Product-trapezoidal lag weights.

    For g sampled on the grid, I_n = int_0^{t_n} M(t_n - s) g(s) ds is approximated by
        lag[0]*g_n + sum_{j=1}^{n-1} lag[j]*g_{n-j} + end[n]*g_0.
    """

    dt: float
    lag: np.ndarray
    end: np.ndarray
    recursion: Optional[ExponentialForm] = None
    order: int = 2

    @property
    def recursion_ok(self) -> bool:
        return self.recursion is not None

    def convolve(self, g: np.ndarray) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        m = g.size
        if m > self.lag.size:
            raise InvalidKernelError(f"sequence of length {m} exceeds the weight table ({self.lag.size})")
        if self.recursion is not None:
            return _recursive_convolution(self.recursion, self.dt, g)
        c = signal.convolve(g, self.lag[:m], mode="full", method="auto")[:m]
        out = c + (self.end[:m] - self.lag[:m]) * g[0]
        out[0] = 0.0
        return out


def _recursive_convolution(form: ExponentialForm, dt: float, g: np.ndarray) -> np.ndarray:
    trap = integrate.cumulative_trapezoid(g, dx=dt, initial=0.0)
    if form.B == 0.0:
        return form.A * trap
    decay, alpha, beta = form.step_coefficients(dt)
    y = signal.lfilter([beta, alpha], [1.0, -decay], g)
    # lfilter starts from y_0 = beta*g_0; J_0 must be 0.
    j = y - beta * g[0] * np.power(decay, np.arange(g.size))
    return form.A * trap - form.B * j


def _interval_moments(kernel: MeasureKernel, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """
    R_k = int M(u)(u - t_k)/dt du and D_k = int M(u)(1 - (u - t_k)/dt) du over
    [t_k, t_{k+1}], k = 0..n.
    """
    dt = grid.dt
    count = grid.n + 1
    tk = np.arange(count, dtype=float) * dt
    R = np.zeros(count)
    D = np.zeros(count)

    for loc, mass in kernel.atoms:
        if mass == 0.0:
            continue
        s = np.clip(loc - tk, 0.0, dt)
        part = mass * (dt * dt - s * s) / (2.0 * dt)
        R += part
        D += mass * (dt - s) - part

    d = kernel.density
    if d is None:
        return R, D

    cut = kernel.density_cutoff
    C = np.empty(count)
    Rint = np.empty(count)
    Dint = np.empty(count)
    wr = _GL_W * (1.0 - _GL_Y**2) / 2.0
    wd = _GL_W * (1.0 - _GL_Y) ** 2 / 2.0
    running = 0.0
    for start in range(0, count, _CHUNK):
        stop = min(count, start + _CHUNK)
        v = tk[start:stop, None] + dt * _GL_Y[None, :]
        with np.errstate(all="ignore"):
            rho = np.asarray(d(v), dtype=float)
        rho = np.where(v <= cut, rho, 0.0)
        mass_k = dt * (rho @ _GL_W)
        Rint[start:stop] = dt * dt * (rho @ wr)
        Dint[start:stop] = dt * dt * (rho @ wd)
        cum = running + np.concatenate(([0.0], np.cumsum(mass_k)[:-1]))
        C[start:stop] = cum
        running = cum[-1] + mass_k[-1]

    if d.integral is not None:
        C = _closed_cumulative(d, tk, cut)
    R += C * dt / 2.0 + Rint
    D += C * dt / 2.0 + Dint
    return R, D


def _closed_cumulative(d: Density, tk: np.ndarray, cut: float) -> np.ndarray:
    if d.exp_form is not None:
        c, lam = d.exp_form
        return (c / lam) * -np.expm1(-lam * np.minimum(tk, cut))
    return np.fromiter((d.integral(min(t, cut)) for t in tk), dtype=float, count=tk.size)


def grid_weights(kernel: MeasureKernel, grid: Grid) -> GridWeights:
    R, D = _interval_moments(kernel, grid)
    lag = D.copy()
    lag[1:] += R[:-1]
    end = np.concatenate(([0.0], R[:-1]))
    return GridWeights(dt=grid.dt, lag=lag, end=end, recursion=exponential_form(kernel))
