"""
Nonlinearities f, their monotone majorants phi and the growth clocks

    F(x) = int_1^x du / f(u),   Phi(x) = int_1^x du / phi(u).

Two built-in families (odd power law, log type) register closed forms; custom
nonlinearities come from config expressions and fall back to quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize

from .debug import debug_log
from .errors import HypothesisError, OutOfRangeError, SingularIntegrandError
from .expr import compile_expr

QUAD_RTOL = 1e-10
ROOT_TOL = 1e-8

_LOG1E = math.log(1.0 + math.e)


@dataclass(frozen=True)
class Hypotheses:
    positive: bool = False  # (A+): f > 0 on [0, inf)
    asym_odd: bool = False  # (A2)
    a3: bool = False
    a4: bool = False
    lipschitz: bool = False  # (L)
    global_linear: bool = False  # (GL)

    @classmethod
    def names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    @classmethod
    def from_names(cls, names) -> "Hypotheses":
        known = set(cls.names())
        bad = [n for n in names if n not in known]
        if bad:
            raise HypothesisError(f"unknown hypothesis flag(s): {', '.join(bad)}")
        return cls(**{n: True for n in names})

    def set_names(self) -> list[str]:
        return [n for n in self.names() if getattr(self, n)]


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    family: str
    f: Callable[[np.ndarray], np.ndarray]
    phi: Callable[[np.ndarray], np.ndarray]
    f_scalar: Callable[[float], float]
    phi_prime: Optional[Callable[[np.ndarray], np.ndarray]] = None
    beta: Optional[float] = None
    F_closed: Optional[Callable[[np.ndarray], np.ndarray]] = None
    Finv_closed: Optional[Callable[[np.ndarray], np.ndarray]] = None
    Phi_closed: Optional[Callable[[np.ndarray], np.ndarray]] = None
    # inf of F over (0, inf) when known; invert_F rejects y at or below it.
    F_floor: float = -math.inf
    hypotheses: Hypotheses = field(default_factory=Hypotheses)
    K: Optional[float] = None
    eta: Optional[float] = None
    label: str = ""

    @property
    def tag(self) -> str:
        if self.family == "power":
            return f"power({self.beta:g})"
        return self.family

    def derivative_of_phi(self, x):
        x = np.asarray(x, dtype=float)
        if self.phi_prime is not None:
            return np.asarray(self.phi_prime(x), dtype=float)
        h = x * 1e-6
        return (np.asarray(self.phi(x + h), dtype=float) - np.asarray(self.phi(x - h), dtype=float)) / (2.0 * h)


def power(beta: float) -> Nonlinearity:
    b = float(beta)
    if not (0.0 < b < 1.0):
        raise HypothesisError(f"power family needs beta in (0, 1), got {beta!r}")
    q = 1.0 - b

    def f(x):
        x = np.asarray(x, dtype=float)
        return np.sign(x) * np.abs(x) ** b

    def f_scalar(x: float) -> float:
        return math.copysign(abs(x) ** b, x) if x else 0.0

    def phi(x):
        return np.asarray(x, dtype=float) ** b

    def F(x):
        return (np.asarray(x, dtype=float) ** q - 1.0) / q

    def Finv(y):
        return (1.0 + q * np.asarray(y, dtype=float)) ** (1.0 / q)

    return Nonlinearity(
        family="power",
        f=f,
        phi=phi,
        f_scalar=f_scalar,
        phi_prime=lambda x: b * np.asarray(x, dtype=float) ** (b - 1.0),
        beta=b,
        F_closed=F,
        Finv_closed=Finv,
        Phi_closed=F,
        F_floor=-1.0 / q,
        # f(0) = 0 and |x|^beta is not Lipschitz at 0.
        hypotheses=Hypotheses(asym_odd=True, a3=True, a4=True, global_linear=True),
        K=1.0,
        eta=1.0,
        label=f"sign(x)*abs(x)**{b!r}",
    )


def logtype() -> Nonlinearity:
    """f(x) = (x+e)/log(x+e) on x >= 0, extended oddly to x < 0."""

    def phi(x):
        u = np.asarray(x, dtype=float) + math.e
        return u / np.log(u)

    def f(x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, 1.0, -1.0) * phi(np.abs(x))

    def f_scalar(x: float) -> float:
        u = abs(x) + math.e
        v = u / math.log(u)
        return v if x >= 0 else -v

    def phi_prime(x):
        lg = np.log(np.asarray(x, dtype=float) + math.e)
        return (lg - 1.0) / (lg * lg)

    def F(x):
        lg = np.log(np.asarray(x, dtype=float) + math.e)
        return 0.5 * (lg * lg - _LOG1E**2)

    def Finv(y):
        return np.exp(np.sqrt(2.0 * np.asarray(y, dtype=float) + _LOG1E**2)) - math.e

    return Nonlinearity(
        family="logtype",
        f=f,
        phi=phi,
        f_scalar=f_scalar,
        phi_prime=phi_prime,
        F_closed=F,
        Finv_closed=Finv,
        F_floor=0.5 * (1.0 - _LOG1E**2),
        hypotheses=Hypotheses(positive=True, asym_odd=True, a3=True, a4=True, lipschitz=True, global_linear=True),
        K=math.e,
        eta=1.0,
        label="(x+e)/log(x+e)",
    )


def custom(
    f_text: str,
    phi_text: str,
    phi_prime_text: str | None = None,
    flags=(),
    K: float | None = None,
    eta: float | None = None,
) -> Nonlinearity:
    fx = compile_expr(f_text, ("x",))
    px = compile_expr(phi_text, ("x",))
    dpx = compile_expr(phi_prime_text, ("x",)) if phi_prime_text else None
    hyp = Hypotheses.from_names(flags)
    if hyp.global_linear and (K is None or eta is None):
        raise HypothesisError("(GL) flag needs nonlinearity.K and nonlinearity.eta")
    return Nonlinearity(
        family="custom",
        f=lambda x: np.asarray(fx(np.asarray(x, dtype=float)), dtype=float),
        phi=lambda x: np.asarray(px(np.asarray(x, dtype=float)), dtype=float),
        f_scalar=lambda x: float(fx(float(x))),
        phi_prime=(lambda x: np.asarray(dpx(np.asarray(x, dtype=float)), dtype=float)) if dpx else None,
        hypotheses=hyp,
        K=K,
        eta=eta,
        label=f"f={fx.text}; phi={px.text}",
    )


def validate(n: Nonlinearity) -> list[str]:
    """Hard failures raise; soft ones are returned (and logged) as warnings."""
    h = n.hypotheses
    if not (h.positive or h.asym_odd):
        raise HypothesisError(f"{n.tag}: solver needs (A+) or (A2)")
    warnings = []
    if not h.lipschitz:
        warnings.append(f"{n.tag}: (L) not set; uniqueness is not guaranteed near f's non-Lipschitz points")
    if not h.global_linear:
        warnings.append(f"{n.tag}: (GL) not set; global existence is not guaranteed")
    for w in warnings:
        debug_log(f"nonlinear.validate: {w}")
    return warnings


def _clock_quad(fn: Callable[[np.ndarray], np.ndarray], x: float, what: str) -> float:
    if x == 1.0:
        return 0.0
    lo, hi = min(1.0, x), max(1.0, x)
    samples = np.geomspace(lo, hi, 257)
    with np.errstate(all="ignore"):
        vals = np.asarray(fn(samples), dtype=float)
    if np.any(~np.isfinite(vals)) or np.any(vals <= 0):
        raise SingularIntegrandError(f"{what} vanishes or is not finite on [{lo:g}, {hi:g}]")

    # u = exp(v) keeps the integrand well scaled over many decades.
    def integrand(v: float) -> float:
        u = math.exp(v)
        return u / float(fn(u))

    val, _err = integrate.quad(integrand, 0.0, math.log(x), epsabs=0.0, epsrel=QUAD_RTOL, limit=200)
    return float(val)


def eval_F(n: Nonlinearity, x: float) -> float:
    x = float(x)
    if not x > 0:
        raise OutOfRangeError(f"F is evaluated on x > 0, got {x!r}")
    if n.F_closed is not None:
        return float(n.F_closed(x))
    return _clock_quad(n.f, x, "f")


def eval_Phi(n: Nonlinearity, x: float) -> float:
    x = float(x)
    if not x > 0:
        raise OutOfRangeError(f"Phi is evaluated on x > 0, got {x!r}")
    if n.Phi_closed is not None:
        return float(n.Phi_closed(x))
    return _clock_quad(n.phi, x, "phi")


def eval_F_array(n: Nonlinearity, x) -> np.ndarray:
    """F over an array; nan where x <= 0."""
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, np.nan)
    pos = x > 0
    if n.F_closed is not None:
        with np.errstate(all="ignore"):
            out[pos] = n.F_closed(x[pos])
        return out
    out[pos] = [eval_F(n, v) for v in x[pos]]
    return out


def invert_F(n: Nonlinearity, y: float) -> float:
    y = float(y)
    if y <= n.F_floor:
        raise OutOfRangeError(f"y={y!r} is below the range of F (inf F = {n.F_floor!r})")
    if y == 0.0:
        return 1.0
    if n.Finv_closed is not None:
        return float(n.Finv_closed(y))

    def g(v: float) -> float:
        return eval_F(n, math.exp(v)) - y

    # Geometric bracket expansion in log x.
    lo, hi, step = -1.0, 1.0, 1.0
    while g(hi) < 0:
        lo, step = hi, step * 2.0
        hi = hi + step
        if hi > 700.0:
            raise OutOfRangeError(f"y={y!r} is above the range of F up to x=1e304")
    while g(lo) > 0:
        hi, step = lo, step * 2.0
        lo = lo - step
        if lo < -700.0:
            raise OutOfRangeError(f"y={y!r} is below the range of F")
    v = optimize.brentq(g, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=300)
    x = math.exp(v)
    if abs(eval_F(n, x) - y) > ROOT_TOL * max(1.0, abs(y)):
        debug_log(f"invert_F: residual above tolerance at y={y!r}")
    return x


def ode_comparison(n: Nonlinearity, M: float, psi: float, t) -> np.ndarray:
    """z(t) = F^{-1}(F(psi) + M t), the unperturbed ODE solution."""
    base = eval_F(n, psi)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if n.Finv_closed is not None:
        with np.errstate(over="ignore"):
            return np.asarray(n.Finv_closed(base + M * t), dtype=float)
    return np.array([invert_F(n, base + M * s) for s in t])


@dataclass(frozen=True)
class PhiPropsReport:
    horizon: float
    lam: float
    slack: float
    max_log_derivative: float
    max_scaling: float
    increasing: bool
    derivative_decays: bool

    @property
    def passed(self) -> bool:
        return (
            self.increasing
            and self.derivative_decays
            and self.max_log_derivative <= 1.0 + self.slack
            and self.max_scaling <= 1.0 + self.slack
        )


def check_phi_props(
    n: Nonlinearity,
    horizon: float = 1e8,
    lam: float = 2.0,
    slack: float = 0.05,
    samples: int = 400,
) -> PhiPropsReport:
    if not n.hypotheses.a4:
        raise HypothesisError(f"{n.tag}: phi property check needs the (A4) flag")
    if lam < 1:
        raise HypothesisError(f"scaling factor must be >= 1, got {lam!r}")
    x = np.geomspace(1.0, float(horizon), samples)
    tail = x[samples // 2 :]
    with np.errstate(all="ignore"):
        phi = np.asarray(n.phi(x), dtype=float)
        phi_tail = np.asarray(n.phi(tail), dtype=float)
        dphi = n.derivative_of_phi(tail)
        log_derivative = tail * dphi / phi_tail
        scaling = np.asarray(n.phi(lam * tail), dtype=float) / (lam * phi_tail)

    increasing = bool(np.all(np.diff(phi) > 0) and phi[-1] > phi[samples // 2])
    steps_ok = np.all(dphi[1:] <= dphi[:-1] * (1.0 + slack))
    decays = bool(steps_ok and dphi[-1] <= (1.0 - slack) * dphi[0] and np.all(dphi > 0))
    return PhiPropsReport(
        horizon=float(horizon),
        lam=float(lam),
        slack=float(slack),
        max_log_derivative=float(np.nanmax(log_derivative)),
        max_scaling=float(np.nanmax(scaling)),
        increasing=increasing,
        derivative_decays=decays,
    )


def check_asymptotic_oddness(n: Nonlinearity, horizon: float = 1e8, tol: float = 0.02) -> tuple[float, bool]:
    """Max deviation of |f(+-x)|/phi(x) from 1 over the last points of a log grid."""
    x = np.geomspace(1.0, float(horizon), 200)[-8:]
    with np.errstate(all="ignore"):
        ratios = np.concatenate([np.abs(n.f(x)), np.abs(n.f(-x))]) / np.concatenate([n.phi(x), n.phi(x)])
    dev = float(np.max(np.abs(ratios - 1.0)))
    return dev, dev <= tol


def check_global_linear(n: Nonlinearity, lo: float = -1e6, hi: float = 1e6, samples: int = 4001) -> bool:
    if n.K is None or n.eta is None:
        raise HypothesisError(f"{n.tag}: (GL) constants K, eta are not registered")
    # Linear grid plus log grids on both sides so the region near 0 is sampled too.
    x = np.concatenate([np.linspace(lo, hi, samples), np.geomspace(1e-6, hi, 200), -np.geomspace(1e-6, -lo, 200)])
    return bool(np.all(np.abs(n.f(x)) <= n.K + n.eta * np.abs(x) + 1e-12))


def clock_equivalence(n: Nonlinearity, x: float = 1e8) -> float:
    """F(x)/Phi(x); tends to 1 for every admissible (f, phi) pair."""
    return eval_F(n, x) / eval_Phi(n, x)


def equivalence_preserved(n: Nonlinearity, horizon: float = 1e8) -> float:
    """
    |phi(a(x))/phi(x) - 1| at the horizon for a(x) = x(1 + 1/log x), a(x) ~ x.
    Small values mean phi carries asymptotic equivalence through.
    """
    x = float(horizon)
    a = x * (1.0 + 1.0 / math.log(x))
    return abs(float(n.phi(a)) / float(n.phi(x)) - 1.0)


def verify_declared(n: Nonlinearity, horizon: float = 1e8) -> None:
    """Sample-check every hypothesis a custom nonlinearity declares; builtin families are known to hold."""
    if n.family != "custom":
        return
    h = n.hypotheses
    if h.positive:
        x = np.concatenate(([0.0], np.geomspace(1e-6, float(horizon), 400)))
        with np.errstate(all="ignore"):
            fx = np.asarray(n.f(x), dtype=float)
        if not np.all(fx > 0):
            raise HypothesisError(f"{n.label}: (A+) declared but f is not positive on [0, {horizon:g}]")
    if h.asym_odd:
        dev, ok = check_asymptotic_oddness(n, horizon)
        if not ok:
            raise HypothesisError(f"{n.label}: (A2) declared but |f(x)|/phi(|x|) is {dev:.3g} away from 1")
    if h.a4:
        report = check_phi_props(n, horizon)
        if not report.passed:
            raise HypothesisError(
                f"{n.label}: (A4) declared but phi fails it "
                f"(increasing={report.increasing}, derivative_decays={report.derivative_decays}, "
                f"max x*phi'/phi={report.max_log_derivative:.3g})"
            )
    if h.global_linear and not check_global_linear(n):
        raise HypothesisError(f"{n.label}: (GL) declared but |f(x)| > K + eta*|x| somewhere on [-1e6, 1e6]")
