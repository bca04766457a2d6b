"""
Noise paths Z on solver grids and their deterministic envelopes.

Every path is generated from its own counter-based stream keyed by
(master seed, stream index), so a path never depends on how many other
paths are drawn, in which order, or in which process.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize
from scipy.stats import levy_stable

from .errors import DomainGuardError, OutOfRangeError
from .expr import compile_expr
from .forcing import Envelope
from .kernel import Grid

_U64 = (1 << 64) - 1


def rng_for(seed: int, stream: int) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed) & _U64, int(stream)])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True, eq=False)
class NoisePath:
    grid: Grid
    values: np.ndarray
    kind: str = "none"
    params: dict = field(default_factory=dict)
    seed: int = 0
    stream: int = 0

    def subsample(self, factor: int) -> "NoisePath":
        if self.grid.n % factor:
            raise ValueError(f"grid of {self.grid.n} steps cannot be coarsened by {factor}")
        coarse = Grid(dt=self.grid.dt * factor, n=self.grid.n // factor)
        return NoisePath(coarse, self.values[::factor].copy(), self.kind, dict(self.params), self.seed, self.stream)


def zero_path(grid: Grid) -> NoisePath:
    return NoisePath(grid, np.zeros(grid.n + 1))


def sample_brownian(sigma: Callable, grid: Grid, seed: int, stream: int) -> NoisePath:
    """Z(t_{k+1}) = Z(t_k) + sigma(t_k + dt/2) sqrt(dt) xi_k."""
    rng = rng_for(seed, stream)
    mid = grid.times[:-1] + grid.dt / 2.0
    s = np.broadcast_to(np.asarray(sigma(mid), dtype=float), mid.shape)
    xi = rng.standard_normal(grid.n)
    values = np.concatenate(([0.0], np.cumsum(s * math.sqrt(grid.dt) * xi)))
    return NoisePath(grid, values, "brownian", {"sigma": getattr(sigma, "text", repr(sigma))}, seed, stream)


def sample_stable(alpha: float, scale: float, skew: float, grid: Grid, seed: int, stream: int) -> NoisePath:
    """
    Cumulative sum of alpha-stable increments with per-step scale dt**(1/alpha)*scale.
    scipy's sampler uses the Chambers-Mallows-Stuck transform.
    """
    alpha = float(alpha)
    if not (0.0 < alpha < 2.0):
        raise OutOfRangeError(f"stable index must lie in (0, 2), got {alpha!r}")
    if not (-1.0 <= skew <= 1.0):
        raise OutOfRangeError(f"stable skew must lie in [-1, 1], got {skew!r}")
    if not scale > 0:
        raise OutOfRangeError(f"stable scale must be positive, got {scale!r}")
    rng = rng_for(seed, stream)
    step_scale = float(scale) * grid.dt ** (1.0 / alpha)
    inc = levy_stable.rvs(alpha, float(skew), loc=0.0, scale=step_scale, size=grid.n, random_state=rng)
    values = np.concatenate(([0.0], np.cumsum(inc)))
    return NoisePath(grid, values, "stable", {"alpha": alpha, "scale": float(scale), "skew": float(skew)}, seed, stream)


@dataclass(frozen=True, eq=False)
class SigmaEnvelope:
    """
    Sigma(t) = sqrt(2 qv(t) loglog qv(t)), qv(t) = int_0^t sigma^2, for qv(t) > e.
    """

    sigma: Callable
    qv: Callable[[np.ndarray], np.ndarray]
    guard_time: float
    # time where loglog qv = 1; `extended` holds Sigma constant before it
    hold_time: float
    constant: bool = False
    label: str = ""

    def defined(self, t) -> np.ndarray:
        with np.errstate(all="ignore"):
            return np.asarray(self.qv(np.asarray(t, dtype=float)), dtype=float) > math.e

    def __call__(self, t):
        q = np.asarray(self.qv(np.asarray(t, dtype=float)), dtype=float)
        if np.any(~(q > math.e)):
            raise DomainGuardError(f"Sigma needs int_0^t sigma^2 > e (guard time {self.guard_time:g})")
        return np.sqrt(2.0 * q * np.log(np.log(q)))

    def masked(self, t) -> np.ndarray:
        """Sigma where defined, nan elsewhere."""
        q = np.asarray(self.qv(np.asarray(t, dtype=float)), dtype=float)
        out = np.full(q.shape, np.nan)
        ok = q > math.e
        out[ok] = np.sqrt(2.0 * q[ok] * np.log(np.log(q[ok])))
        return out

    def extended(self, t):
        t = np.asarray(t, dtype=float)
        return self(np.maximum(t, self.hold_time))


_NUMBER_RE = re.compile(r"^\s*[+-]?[0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?\s*$")
_POWER_RE = re.compile(
    r"^\s*(?:(?P<c>[0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?)\s*\*\s*)?t\s*\*\*\s*(?P<a>[0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?)\s*$"
)


def _first_time_above(qv: Callable, level: float, hi: float = 1e15) -> float:
    # doubling bracket from t=1
    lo, top = 0.0, 1.0
    with np.errstate(all="ignore"):
        while not float(qv(top)) > level:
            if top >= hi:
                return math.inf
            lo, top = top, min(2.0 * top, hi)
    try:
        root = optimize.brentq(lambda t: float(qv(t)) - level, lo, top, xtol=1e-12, rtol=1e-12, maxiter=300)
    except (RuntimeError, ValueError) as e:
        raise DomainGuardError(f"cannot locate the time where int_0^t sigma^2 = {level:g}: {e}") from e
    return float(root)


def make_sigma_envelope(sigma: Callable, qv: Optional[Callable] = None, constant: bool = False, label: str = "") -> SigmaEnvelope:
    if qv is None:

        def qv(t):
            def one(s: float) -> float:
                val, _err = integrate.quad(lambda u: float(sigma(u)) ** 2, 0.0, s, epsrel=1e-10, limit=200)
                return val

            return np.vectorize(one, otypes=[float])(np.asarray(t, dtype=float))

    guard = _first_time_above(qv, math.e)
    hold = _first_time_above(qv, math.exp(math.e))
    return SigmaEnvelope(sigma=sigma, qv=qv, guard_time=guard, hold_time=hold, constant=constant, label=label)


def constant_sigma(s0: float) -> SigmaEnvelope:
    s0 = float(s0)
    return make_sigma_envelope(
        lambda t: s0 + 0.0 * np.asarray(t, dtype=float),
        qv=lambda t: s0 * s0 * np.asarray(t, dtype=float),
        constant=True,
        label=f"{s0:g}",
    )


def power_sigma(a: float, c: float = 1.0) -> SigmaEnvelope:
    a, c = float(a), float(c)
    return make_sigma_envelope(
        lambda t: c * np.asarray(t, dtype=float) ** a,
        qv=lambda t: c * c * np.asarray(t, dtype=float) ** (2.0 * a + 1.0) / (2.0 * a + 1.0),
        label=f"{c:g}*t**{a:g}",
    )


def sigma_from_text(text: str) -> SigmaEnvelope:
    """Constant and c*t**a sigmas get closed-form qv; anything else uses quadrature."""
    raw = str(text).strip()
    if _NUMBER_RE.match(raw):
        return constant_sigma(float(raw))
    m = _POWER_RE.match(raw)
    if m:
        return power_sigma(float(m.group("a")), float(m.group("c") or 1.0))
    ex = compile_expr(raw, ("t",))
    return make_sigma_envelope(ex, label=ex.text)


def sigma_envelope(sigma, t):
    """Sigma(t); `sigma` is a SigmaEnvelope or a plain sigma function."""
    if isinstance(sigma, SigmaEnvelope):
        return sigma(t)
    try:
        env = make_sigma_envelope(sigma)
    except DomainGuardError:
        raise
    except (RuntimeError, OverflowError, ZeroDivisionError) as e:
        raise DomainGuardError(f"cannot build Sigma from {sigma!r}: {e}") from e
    return env(t)


def envelope_integrability(env: Envelope, alpha: float, horizon: float = 1e8) -> str:
    """
    'finite' or 'infinite' for int_0^inf gamma(s)**-alpha ds.

    Power envelopes (1+t)**eps are decided in closed form (finite iff eps*alpha > 1).
    Otherwise the integrand's decay exponent p is measured over the last decades
    before `horizon` and the tail is treated as s**-p.
    """
    if env.power is not None:
        return "finite" if env.power * alpha > 1.0 + 1e-9 else "infinite"
    t = np.geomspace(max(1.0, horizon / 1e4), horizon, 64)
    vals = env(t)
    if np.any(vals <= 0) or np.any(np.isnan(vals)):
        raise OutOfRangeError(f"envelope {env.label!r} must be positive on [1, {horizon:g}]")
    if np.any(np.isinf(vals)):
        # Overflowing envelopes decay faster than any power.
        return "finite"
    slope = alpha * np.polyfit(np.log(t[-16:]), np.log(vals[-16:]), 1)[0]
    return "finite" if slope > 1.02 else "infinite"


def square_integrable(env: SigmaEnvelope, horizon: float = 1e12) -> bool:
    """True when int_0^inf sigma^2 has converged by `horizon` (Z then has a finite limit)."""
    if env.constant:
        return False
    with np.errstate(all="ignore"):
        far = float(env.qv(horizon))
        near = float(env.qv(horizon / 1e3))
    if not math.isfinite(far):
        return False
    return far - near <= 1e-6 * max(1.0, far)
