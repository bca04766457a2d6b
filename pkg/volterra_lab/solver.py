"""
Time stepping for

    x(t) = psi + int_0^t M(t-s) f(x(s)) ds + H(t)             (deterministic)
    X(t) = psi + int_0^t M(t-s) f(X(s)) ds + H0(t) + Z(t)     (stochastic)

Both use the product-trapezoidal weights of `kernel.grid_weights`. Kernels with
M(u) = A - B exp(-rate*u) (an atom at 0 and/or an exponential density) are
stepped with a two-term recursion instead of the full history sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from .debug import debug_log
from .errors import StepFailureError
from .forcing import ForcingTerm, zero_forcing
from .kernel import Grid, MeasureKernel, exponential_form, grid_weights
from .noise import NoisePath, sample_brownian
from .nonlinear import Nonlinearity

MAX_FIXED_POINT = 50
FIXED_POINT_TOL = 1e-12
OVERFLOW = 1e300


@dataclass(frozen=True, eq=False)
class Trajectory:
    grid: Grid
    values: np.ndarray
    initial: float
    H: np.ndarray
    Z: Optional[np.ndarray] = None
    truncated_at: Optional[float] = None
    meta: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times[: self.values.size]

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def stochastic(self) -> bool:
        return self.Z is not None


class _History:
    """Convolution history I_n = sum_j w_j g_{n-j} (+ end weight), minus the lag-0 term."""

    def __init__(self, kernel: MeasureKernel, grid: Grid, g0: float) -> None:
        self.dt = grid.dt
        self.form = exponential_form(kernel)
        if self.form is not None:
            self.decay, self.alpha, self.beta = self.form.step_coefficients(grid.dt)
            self.w0 = self.form.diagonal_weight(grid.dt)
            self.trap = 0.0
            self.J = 0.0
            self.g_prev = g0
        else:
            w = grid_weights(kernel, grid)
            self.lag = w.lag
            self.end = w.end
            self.w0 = float(w.lag[0])
            self.g = np.empty(grid.n + 1)
            self.g[0] = g0
        self.k = 0

    def known(self) -> float:
        """Part of I_{k+1} that does not involve g_{k+1}."""
        k1 = self.k + 1
        if self.form is not None:
            A, B = self.form.A, self.form.B
            return A * (self.trap + 0.5 * self.dt * self.g_prev) - B * (self.decay * self.J + self.alpha * self.g_prev)
        acc = self.end[k1] * self.g[0]
        if k1 > 1:
            acc += float(np.dot(self.lag[1:k1], self.g[k1 - 1 : 0 : -1]))
        return acc

    def push(self, g_new: float) -> None:
        if self.form is not None:
            self.trap += 0.5 * self.dt * (self.g_prev + g_new)
            self.J = self.decay * self.J + self.alpha * self.g_prev + self.beta * g_new
            self.g_prev = g_new
        else:
            self.g[self.k + 1] = g_new
        self.k += 1

    @property
    def last(self) -> float:
        return self.g_prev if self.form is not None else float(self.g[self.k])


def _implicit_step(base: float, w0: float, f: Callable[[float], float], guess: float, t: float) -> float:
    """Solve x = base + w0 f(x)."""
    x = guess
    for _ in range(MAX_FIXED_POINT):
        nxt = base + w0 * f(x)
        if abs(nxt - x) <= FIXED_POINT_TOL * max(1.0, abs(nxt)):
            return nxt
        x = nxt
    debug_log(f"solver: fixed point stalled at t={t:g}; falling back to Newton")
    try:
        return float(optimize.newton(lambda y: y - base - w0 * f(y), guess, tol=FIXED_POINT_TOL * max(1.0, abs(base)), maxiter=50))
    except (RuntimeError, OverflowError, ZeroDivisionError) as e:
        raise StepFailureError(t, f"implicit step failed to converge at t={t:g}: {e}") from e


def _forcing_values(forcing: Optional[ForcingTerm], times: np.ndarray) -> np.ndarray:
    if forcing is None or forcing.is_zero:
        return np.zeros_like(times)
    with np.errstate(all="ignore"):
        return forcing(times)


def solve_deterministic(
    kernel: MeasureKernel,
    n: Nonlinearity,
    forcing: Optional[ForcingTerm],
    psi: float,
    grid: Grid,
) -> Trajectory:
    times = grid.times
    Hv = _forcing_values(forcing, times)
    f = n.f_scalar
    psi = float(psi)
    x = np.empty(grid.n + 1)
    x[0] = psi
    hist = _History(kernel, grid, f(psi))
    truncated = None

    for k in range(1, grid.n + 1):
        try:
            base = psi + hist.known() + Hv[k]
            if not math.isfinite(base) or abs(base) > OVERFLOW:
                raise OverflowError
            xk = _implicit_step(base, hist.w0, f, x[k - 1], times[k])
            gk = f(xk)
            if not (math.isfinite(xk) and math.isfinite(gk)) or abs(xk) > OVERFLOW:
                raise OverflowError
        except OverflowError:
            truncated = float(times[k])
            debug_log(f"solver: overflow, horizon truncated at t={truncated:g}")
            break
        x[k] = xk
        hist.push(gk)

    size = hist.k + 1
    return Trajectory(
        grid=grid,
        values=x[:size].copy(),
        initial=psi,
        H=Hv[:size].copy(),
        truncated_at=truncated,
        meta={"kernel": kernel, "nonlinearity": n.tag, "forcing": forcing.name if forcing else "zero"},
    )


def solve_stochastic(
    kernel: MeasureKernel,
    n: Nonlinearity,
    forcing: Optional[ForcingTerm],
    noise: NoisePath,
    psi: float,
    grid: Grid,
) -> Trajectory:
    """
    Explicit scheme: the lag-0 weight multiplies f(X(t_{k-1})), i.e. the
    integrand is evaluated at the left limit.
    """
    if not math.isclose(noise.grid.dt, grid.dt, rel_tol=1e-12) or noise.grid.n < grid.n:
        raise ValueError("noise path and solver grid do not match")
    times = grid.times
    Hv = _forcing_values(forcing, times)
    Z = np.asarray(noise.values[: grid.n + 1], dtype=float)
    f = n.f_scalar
    psi = float(psi)
    X = np.empty(grid.n + 1)
    X[0] = psi
    hist = _History(kernel, grid, f(psi))
    w0 = hist.w0
    truncated = None

    for k in range(1, grid.n + 1):
        try:
            xk = psi + hist.known() + w0 * hist.last + Hv[k] + Z[k]
            gk = f(xk)
            if not (math.isfinite(xk) and math.isfinite(gk)) or abs(xk) > OVERFLOW:
                raise OverflowError
        except OverflowError:
            truncated = float(times[k])
            debug_log(f"solver: stochastic overflow, horizon truncated at t={truncated:g}")
            break
        X[k] = xk
        hist.push(gk)

    size = hist.k + 1
    return Trajectory(
        grid=grid,
        values=X[:size].copy(),
        initial=psi,
        H=Hv[:size].copy(),
        Z=Z[:size].copy(),
        truncated_at=truncated,
        meta={
            "kernel": kernel,
            "nonlinearity": n.tag,
            "forcing": forcing.name if forcing else "zero",
            "noise": noise.kind,
            "seed": noise.seed,
            "stream": noise.stream,
        },
    )


@dataclass(frozen=True, eq=False)
class Problem:
    kernel: MeasureKernel
    nonlinearity: Nonlinearity
    forcing: Optional[ForcingTerm] = None
    psi: float = 1.0
    sigma: Optional[Callable] = None
    seed: int = 0
    stream: int = 0

    @property
    def kind(self) -> str:
        return "brownian" if self.sigma is not None else "deterministic"


@dataclass(frozen=True)
class ConvergenceReport:
    kind: str
    steps: tuple[float, ...]
    differences: tuple[float, ...]
    orders: tuple[float, ...]
    exact: bool

    @property
    def observed_order(self) -> float:
        return self.orders[-1] if self.orders else math.nan

    @property
    def passed(self) -> bool:
        if self.exact:
            return True
        p = self.observed_order
        if self.kind == "brownian":
            return p >= 0.9
        return 1.8 <= p <= 2.2


def refine_and_compare(problem: Problem, grid: Grid, levels: int = 4) -> ConvergenceReport:
    """
    Solve on dt, dt/2, ..., dt/2**(levels-1) and compare on the coarse grid.

    Brownian problems draw one path on the finest grid; coarser levels see its
    subsampled values, so every level integrates the same realization.
    """
    if levels < 3:
        raise ValueError(f"convergence study needs at least 3 levels, got {levels}")
    finest = 2 ** (levels - 1)
    fine_noise = None
    if problem.sigma is not None:
        fine_noise = sample_brownian(problem.sigma, grid.refine(finest), problem.seed, problem.stream)

    coarse: list[np.ndarray] = []
    steps: list[float] = []
    for level in range(levels):
        factor = 2**level
        g = grid.refine(factor)
        if fine_noise is None:
            traj = solve_deterministic(problem.kernel, problem.nonlinearity, problem.forcing, problem.psi, g)
        else:
            path = fine_noise.subsample(finest // factor) if factor < finest else fine_noise
            traj = solve_stochastic(problem.kernel, problem.nonlinearity, problem.forcing, path, problem.psi, g)
        coarse.append(traj.values[::factor])
        steps.append(g.dt)

    common = min(v.size for v in coarse)
    coarse = [v[:common] for v in coarse]
    diffs = [float(np.max(np.abs(a - b))) for a, b in zip(coarse, coarse[1:])]
    scale = max(1.0, float(np.max(np.abs(coarse[-1]))))
    exact = max(diffs) <= 1e-10 * scale
    orders = []
    if not exact:
        for a, b in zip(diffs, diffs[1:]):
            orders.append(math.log2(a / b) if a > 0 and b > 0 else math.nan)
    return ConvergenceReport(
        kind=problem.kind,
        steps=tuple(steps),
        differences=tuple(diffs),
        orders=tuple(orders),
        exact=exact,
    )


def solve(problem: Problem, grid: Grid, noise: Optional[NoisePath] = None) -> Trajectory:
    if noise is None and problem.sigma is None:
        return solve_deterministic(problem.kernel, problem.nonlinearity, problem.forcing, problem.psi, grid)
    if noise is None:
        noise = sample_brownian(problem.sigma, grid, problem.seed, problem.stream)
    return solve_stochastic(problem.kernel, problem.nonlinearity, problem.forcing or zero_forcing(), noise, problem.psi, grid)

