"""
Finite-horizon surrogates for the limits that decide a run's regime.

Every asymptotic statement is checked through one of three devices:

- `extrapolate_limit`: a ratio sampled at geometric times is fitted against
  1/sqrt(t) (with a 1/log t cross-fit) and its intercept taken as the limit;
  monotone runs past a threshold, or with a steep log-log trend, are flagged
  infinite or zero instead.
- `tail_limsup`: max/min over 8 windows of [T/2, T] stand in for limsup/liminf.
- `classify`: maps the L-functional estimate to a regime and judges each bound
  that applies to it against the measured statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np
from scipy import integrate

from .debug import debug_log
from .errors import InsufficientHorizonError
from .nonlinear import Nonlinearity, eval_F_array, eval_Phi

FINITE = "finite"
INFINITE = "infinite"
ZERO = "zero"

ODE = "ode_dominated"
LOW = "intermediate_low"
INDETERMINATE = "indeterminate"
HIGH = "intermediate_high"
FORCING = "forcing_dominated"
REGIMES = (ODE, LOW, INDETERMINATE, HIGH, FORCING)

MODES = ("deterministic", "envelope", "brownian", "stable")

PASS = "pass"
FAIL = "fail"
NA = "n/a"

INF_THRESHOLD = 1e3
ZERO_THRESHOLD = 1e-3
CLOCK_INF_THRESHOLD = 10.0
TREND_SLOPE = 0.15
BOUNDARY_SLACK = 1e-9
FIT_POINTS = 8
TAIL_WINDOWS = 8
MIN_L_POINTS = 6


@dataclass(frozen=True, eq=False)
class LEstimate:
    value: float
    lo: float
    hi: float
    flag: str = FINITE
    times: np.ndarray = field(default_factory=lambda: np.empty(0))
    ratios: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def finite(self) -> bool:
        return self.flag == FINITE

    @classmethod
    def exact(cls, value: float) -> "LEstimate":
        v = float(value)
        flag = INFINITE if math.isinf(v) else ZERO if v == 0.0 else FINITE
        return cls(v, v, v, flag)


@dataclass(frozen=True, eq=False)
class RatioTrace:
    name: str
    times: np.ndarray
    values: np.ndarray

    @property
    def last(self) -> float:
        return float(self.values[-1]) if self.values.size else math.nan

    def rising(self, points: int = 4) -> bool:
        v = self.values[-points:]
        return v.size == points and bool(np.all(np.isfinite(v)) and np.all(np.diff(v) > 0))


@dataclass(frozen=True)
class TailStats:
    limsup: float
    liminf: float
    window_max: tuple[float, ...]
    window_min: tuple[float, ...]

    def merge(self, other: "TailStats") -> "TailStats":
        if len(self.window_max) != len(other.window_max):
            raise ValueError("cannot merge tail statistics over different window partitions")
        wmax = tuple(float(v) for v in np.fmax(self.window_max, other.window_max))
        wmin = tuple(float(v) for v in np.fmin(self.window_min, other.window_min))
        return TailStats(max(self.limsup, other.limsup), min(self.liminf, other.liminf), wmax, wmin)

    @staticmethod
    def merge_all(stats: Iterable["TailStats"]) -> Optional["TailStats"]:
        out = None
        for s in stats:
            out = s if out is None else out.merge(s)
        return out


def _log_slope(times: np.ndarray, values: np.ndarray) -> float:
    return float(np.polyfit(np.log(times), np.log(values), 1)[0])


def _flag(times: np.ndarray, r: np.ndarray, inf_threshold: float, zero_threshold: float) -> str:
    last3 = r[-3:]
    d3 = np.diff(last3)
    if np.all(d3 > 0) and np.all(last3 > inf_threshold):
        return INFINITE
    if np.all(d3 < 0) and np.all(last3 < zero_threshold):
        return ZERO
    last4 = r[-4:]
    if last4.size == 4 and np.all(last4 > 0):
        d4 = np.diff(last4)
        slope = _log_slope(times[-4:], last4)
        if np.all(d4 > 0) and slope >= TREND_SLOPE:
            return INFINITE
        if np.all(d4 < 0) and slope <= -TREND_SLOPE:
            return ZERO
    return FINITE


def _fit(basis: np.ndarray, r: np.ndarray) -> tuple[float, float]:
    """Intercept of r ~ a + b*basis and the max residual over the last 4 points."""
    b, a = np.polyfit(basis, r, 1)
    resid = np.abs(r - (a + b * basis))[-4:]
    return float(a), float(resid.max())


def extrapolate_limit(
    times,
    ratios,
    inf_threshold: float = INF_THRESHOLD,
    zero_threshold: float = ZERO_THRESHOLD,
    min_points: int = 4,
) -> LEstimate:
    t = np.asarray(times, dtype=float)
    r = np.asarray(ratios, dtype=float)
    order = np.argsort(t)
    t, r = t[order], r[order]
    if r.size and np.isposinf(r[-1]):
        finite = r[np.isfinite(r)]
        return LEstimate(math.inf, float(finite[-1]) if finite.size else math.inf, math.inf, INFINITE, t, r)
    ok = np.isfinite(r) & (t > 0)
    t, r = t[ok], r[ok]
    if t.size < min_points:
        raise InsufficientHorizonError(f"need at least {min_points} finite ratio samples, got {t.size}")

    flag = _flag(t, r, inf_threshold, zero_threshold)
    if flag == INFINITE:
        return LEstimate(math.inf, float(r[-1]), math.inf, flag, t, r)
    if flag == ZERO:
        return LEstimate(0.0, 0.0, float(r[-1]), flag, t, r)

    k = min(FIT_POINTS, t.size)
    tt, rr = t[-k:], r[-k:]
    a, half = _fit(tt**-0.5, rr)
    lo, hi = a - half, a + half
    big = tt > math.e
    if np.count_nonzero(big) >= 4:
        a2, half2 = _fit(1.0 / np.log(tt[big]), rr[big])
        lo, hi = min(lo, a2 - half2), max(hi, a2 + half2)
    return LEstimate(max(a, 0.0), max(lo, 0.0), max(hi, 0.0), FINITE, t, r)


def _f_integral(gamma: Callable, n: Nonlinearity, times: np.ndarray) -> np.ndarray:
    """int_0^t f(gamma(s)) ds at each (ascending) time."""
    table = getattr(gamma, "table", None)
    if table is not None:
        tt, gv = table
        with np.errstate(all="ignore"):
            cum = integrate.cumulative_trapezoid(np.asarray(n.f(gv), dtype=float), tt, initial=0.0)
        return np.interp(times, tt, cum)

    def integrand(s: float) -> float:
        return n.f_scalar(float(gamma(s)))

    out = np.empty(times.size)
    acc, prev = 0.0, 0.0
    for i, t in enumerate(times):
        piece, _err = integrate.quad(integrand, prev, float(t), epsabs=0.0, epsrel=1e-10, limit=200)
        acc += piece
        out[i] = acc
        prev = float(t)
    return out


def estimate_L(
    gamma: Callable,
    n: Nonlinearity,
    M: float,
    horizon: float,
    samples: int = 24,
    inf_threshold: float = INF_THRESHOLD,
    zero_threshold: float = ZERO_THRESHOLD,
) -> LEstimate:
    """
    L_f(gamma) = lim gamma(t) / (M int_0^t f(gamma(s)) ds), sampled at
    t_j = horizon / 2**j and extrapolated with `extrapolate_limit`.
    """
    times = float(horizon) / 2.0 ** np.arange(samples)[::-1]
    times = times[times >= 1.0]
    with np.errstate(all="ignore"):
        g = np.asarray(gamma(times), dtype=float)
    ok = np.isfinite(g) & (g > 0)
    # Stop at the first unusable point: the integral needs gamma on all of [0, t].
    stop = int(np.argmin(ok)) if not ok.all() else ok.size
    times, g = times[:stop], g[:stop]
    if times.size < MIN_L_POINTS:
        raise InsufficientHorizonError(
            f"horizon {horizon:g} leaves {times.size} usable sample times (need {MIN_L_POINTS})"
        )
    denom = M * _f_integral(gamma, n, times)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = g / denom
    est = extrapolate_limit(times, r, inf_threshold, zero_threshold, min_points=MIN_L_POINTS)
    if not est.finite:
        debug_log(f"estimate_L: {est.flag} flag at horizon {times[-1]:g} (last ratio {r[-1]:g})")
    return est


def sample_indices(grid_times: np.ndarray, per_octave: int = 2) -> np.ndarray:
    """Grid indices nearest to T*2**(-j/per_octave) for times >= 1, ascending and unique."""
    t = np.asarray(grid_times, dtype=float)
    T = float(t[-1])
    if T < 1.0:
        return np.empty(0, dtype=int)
    count = int(math.floor(per_octave * math.log2(T))) + 1
    targets = T * 2.0 ** (-np.arange(count) / per_octave)
    dt = t[1] - t[0]
    idx = np.clip(np.rint(targets / dt).astype(int), 1, t.size - 1)
    return np.unique(idx)


def clock_ratio(trace, n: Nonlinearity, M: float) -> tuple[RatioTrace, LEstimate]:
    """F(|x(t)|)/(Mt) at geometric times; the limit flags infinity past 10."""
    idx = sample_indices(trace.times)
    t = trace.times[idx]
    vals = eval_F_array(n, np.abs(trace.values[idx])) / (M * t)
    rt = RatioTrace("clock_ratio", t, vals)
    return rt, extrapolate_limit(t, vals, inf_threshold=CLOCK_INF_THRESHOLD)


def phi_clock_ratio(gamma: Callable, n: Nonlinearity, M: float, times) -> tuple[RatioTrace, LEstimate]:
    """Phi(gamma(t))/(Mt); its limit agrees with L_f(gamma)."""
    t = np.asarray(times, dtype=float)
    vals = np.array([eval_Phi(n, float(gamma(s))) for s in t]) / (M * t)
    return RatioTrace("phi_clock_ratio", t, vals), extrapolate_limit(t, vals)


def tail_limsup(trace: RatioTrace, windows: int = TAIL_WINDOWS) -> TailStats:
    """
    Split [T/2, T] into equal windows; limsup is the largest window maximum,
    liminf the smallest window minimum.
    """
    t = np.asarray(trace.times, dtype=float)
    v = np.asarray(trace.values, dtype=float)
    T = float(t[-1])
    sel = (t >= T / 2.0) & np.isfinite(v)
    if np.count_nonzero(sel) < windows:
        raise ValueError(f"{trace.name}: fewer than {windows} finite samples on [T/2, T]")
    edges = np.linspace(T / 2.0, T, windows + 1)
    which = np.clip(np.searchsorted(edges, t[sel], side="right") - 1, 0, windows - 1)
    wmax = np.full(windows, np.nan)
    wmin = np.full(windows, np.nan)
    np.fmax.at(wmax, which, v[sel])
    np.fmin.at(wmin, which, v[sel])
    return TailStats(
        limsup=float(np.nanmax(wmax)),
        liminf=float(np.nanmin(wmin)),
        window_max=tuple(float(x) for x in wmax),
        window_min=tuple(float(x) for x in wmin),
    )


def bounds(L: float) -> tuple[float, float]:
    """(G_L, G_U) = (1 + 1/L, L/(L-1)); G_U is infinite for L <= 1."""
    L = float(L)
    if math.isinf(L):
        return 1.0, 1.0
    if not L > 0:
        return math.nan, math.nan
    return 1.0 + 1.0 / L, (L / (L - 1.0) if L > 1.0 else math.inf)


def regime_for(est: LEstimate, zero_threshold: float = ZERO_THRESHOLD, inf_threshold: float = INF_THRESHOLD) -> str:
    if est.flag == INFINITE or est.value >= inf_threshold:
        return FORCING
    if est.flag == ZERO or est.value <= zero_threshold:
        return ODE
    if est.lo > 1.0 + BOUNDARY_SLACK:
        return HIGH
    if est.hi < 1.0 - BOUNDARY_SLACK:
        return LOW
    return INDETERMINATE


@dataclass(frozen=True)
class Check:
    name: str
    status: str
    value: float = math.nan
    lo: float = -math.inf
    hi: float = math.inf
    # "<trace>:limsup" / "<trace>:liminf" when the value is a tail statistic
    source: str = ""
    detail: str = ""

    def rejudged(self, value: float) -> "Check":
        return judge(self.name, value, self.lo, self.hi, self.source, self.detail)


def judge(name: str, value, lo: float = -math.inf, hi: float = math.inf, source: str = "", detail: str = "") -> Check:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return Check(name, NA, math.nan, lo, hi, source, detail or "not measured")
    v = float(value)
    return Check(name, PASS if lo <= v <= hi else FAIL, v, lo, hi, source, detail)


def not_applicable(name: str, detail: str) -> Check:
    return Check(name, NA, detail=detail)


@dataclass(frozen=True, eq=False)
class TrendInputs:
    """Brownian runs with a deterministic trend H0."""

    ratio: LEstimate  # lim Sigma/H0
    L_H0: LEstimate
    xh0_tail: Optional[TailStats] = None


@dataclass(frozen=True, eq=False)
class ClassifyInputs:
    mode: str
    L: LEstimate
    tolerance: float = 0.05
    zero_threshold: float = ZERO_THRESHOLD
    inf_threshold: float = INF_THRESHOLD
    clock: Optional[LEstimate] = None
    clock_trace: Optional[RatioTrace] = None
    clock_tail: Optional[TailStats] = None
    # x/H
    xh: Optional[LEstimate] = None
    xh_trace: Optional[RatioTrace] = None
    xh_tail: Optional[TailStats] = None
    # |x|/gamma for envelope and stable modes
    envelope_role: str = "gamma"
    xg_trace: Optional[RatioTrace] = None
    xg_tail: Optional[TailStats] = None
    x_minus_h_last: float = math.nan
    # X/Sigma and |X - Z|/Sigma at T
    xs_tail: Optional[TailStats] = None
    xzs_last: float = math.nan
    max_abs: float = math.nan
    sigma_constant: bool = False
    sigma_square_integrable: bool = False
    integrable: Optional[bool] = None
    trend: Optional[TrendInputs] = None
    traces: dict = field(default_factory=dict)
    tails: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class RegimeReport:
    mode: str
    L: LEstimate
    regime: str
    G_L: float
    G_U: float
    theorems: tuple[str, ...]
    checks: tuple[Check, ...]
    notes: dict = field(default_factory=dict)
    tolerance: float = 0.05
    zero_threshold: float = ZERO_THRESHOLD
    inf_threshold: float = INF_THRESHOLD
    horizon: float = math.nan
    truncated_at: Optional[float] = None
    traces: dict = field(default_factory=dict)
    # TailStats per ratio name, kept so ensembles can merge them
    tails: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.status != FAIL for c in self.checks)

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def items(self) -> list[tuple[str, object]]:
        """Flat key/value pairs in report order; values are left unformatted."""
        out: list[tuple[str, object]] = [
            ("L", self.L.value),
            ("L_lo", self.L.lo),
            ("L_hi", self.L.hi),
            ("L_flag", self.L.flag),
            ("regime", self.regime),
            ("G_L", self.G_L),
            ("G_U", self.G_U),
            ("theorems", ",".join(self.theorems) or "none"),
        ]
        checks = sorted(self.checks, key=lambda c: c.name)
        out += [(f"checks.{c.name}", c.status) for c in checks]
        out += [(f"value.{c.name}", c.value) for c in checks]
        out += [(f"bound.{c.name}", (c.lo, c.hi)) for c in checks]
        out += [
            ("mode", self.mode),
            ("horizon", self.horizon),
            ("truncated_at", self.truncated_at),
            ("threshold.infinity", self.inf_threshold),
            ("threshold.zero", self.zero_threshold),
            ("tolerance", self.tolerance),
        ]
        out += [(f"note.{k}", v) for k, v in sorted(self.notes.items())]
        return out


def _tail(tail: Optional[TailStats], side: str) -> float:
    if tail is None:
        return math.nan
    return tail.limsup if side == "limsup" else tail.liminf


class _Checks:
    """Accumulates checks, theorem names and notes while classifying."""

    def __init__(self, inp: ClassifyInputs) -> None:
        self.inp = inp
        self.tol = inp.tolerance
        self.checks: list[Check] = []
        self.theorems: list[str] = []
        self.notes: dict[str, str] = {}

    def add(self, check: Check) -> None:
        self.checks.append(check)

    def tail(self, name: str, trace: str, tail: Optional[TailStats], side: str, lo=-math.inf, hi=math.inf) -> None:
        self.add(judge(name, _tail(tail, side), lo, hi, source=f"{trace}:{side}"))

    def clock_upper(self, limit: float) -> None:
        self.tail("clock_upper", "clock_ratio", self.inp.clock_tail, "limsup", hi=limit * (1.0 + self.tol))


def _deterministic(c: _Checks, regime: str) -> None:
    inp, tol = c.inp, c.tol
    L = inp.L
    if regime == ODE:
        c.theorems.append("ode_rate_retained")
        c.add(judge("clock_limit", inp.clock.value if inp.clock else math.nan, 1.0 - tol, 1.0 + tol))
        if inp.xh_trace is None:
            c.add(not_applicable("x_over_H_diverges", "forcing is zero"))
        else:
            last = inp.xh_trace.last
            rising = inp.xh_trace.rising()
            status = PASS if (last >= 10.0 and rising) else FAIL
            c.add(Check("x_over_H_diverges", status, last, 10.0, math.inf, detail="rising" if rising else "not rising"))
        return
    if regime == FORCING:
        c.theorems.append("forcing_dominates")
        c.add(judge("x_over_H_limit", inp.xh.value if inp.xh else math.nan, 1.0 - tol, 1.0 + tol))
        diverges = inp.clock is not None and inp.clock.flag == INFINITE
        last = inp.clock_trace.last if inp.clock_trace is not None else math.nan
        c.add(Check("clock_diverges", PASS if diverges else FAIL, last, CLOCK_INF_THRESHOLD, math.inf))
        return

    # L in (0, inf), or straddling 1.
    c.theorems.append("clock_bounds")
    g_l = 1.0 + 1.0 / L.hi if math.isfinite(L.hi) and L.hi > 0 else 1.0
    c.tail("clock_lower", "clock_ratio", inp.clock_tail, "liminf", lo=1.0 - tol)
    c.clock_upper(1.0 + L.hi)
    c.tail("x_over_H_lower", "x_over_H", inp.xh_tail, "liminf", lo=g_l * (1.0 - tol))
    if regime == HIGH:
        c.theorems.append("ratio_bounds")
        _g, g_u = bounds(L.lo)
        c.tail("x_over_H_upper", "x_over_H", inp.xh_tail, "limsup", hi=g_u * (1.0 + tol))
    elif regime == LOW:
        c.notes["x_over_H"] = "no sharp prediction for L in (0, 1]: x/H may stay bounded or diverge"
    else:
        c.notes["regime"] = f"L interval [{L.lo:.6g}, {L.hi:.6g}] straddles 1"


def _envelope(c: _Checks, regime: str) -> None:
    inp, tol, L = c.inp, c.tol, c.inp.L
    role = inp.envelope_role
    if role == "gamma_minus":
        c.notes["envelope"] = "lower envelope only predicts limsup |x|/gamma_minus = inf"
        c.add(not_applicable("x_over_gamma_upper", "gamma_minus envelope"))
        return
    if role == "gamma_plus":
        if regime == FORCING:
            c.theorems.append("upper_envelope_vanishes")
            c.add(judge("x_over_gamma_limit", inp.xg_trace.last if inp.xg_trace else math.nan, hi=tol))
        elif regime == HIGH:
            c.theorems.append("upper_envelope")
            c.tail("x_over_gamma_upper", "x_over_gamma", inp.xg_tail, "limsup", hi=(1.0 / L.lo) * (1.0 + tol))
        else:
            c.add(not_applicable("x_over_gamma_upper", "needs L_f(gamma_plus) > 1"))
        return
    if regime == FORCING:
        c.theorems.append("envelope_tracking")
        c.tail("x_over_gamma_limsup", "x_over_gamma", inp.xg_tail, "limsup", 1.0 - tol, 1.0 + tol)
        c.add(judge("x_minus_H_over_gamma", inp.x_minus_h_last, hi=tol))
    elif regime == HIGH:
        c.theorems.append("envelope_bounds")
        _g, g_u = bounds(L.lo)
        c.tail("x_over_gamma_upper", "x_over_gamma", inp.xg_tail, "limsup", hi=g_u * (1.0 + tol))
    else:
        c.notes["envelope"] = "no prediction for |x|/gamma when L_f(gamma) <= 1"
        c.add(not_applicable("x_over_gamma_upper", "needs L_f(gamma) > 1"))


def _sigma_checks(c: _Checks, L: LEstimate, regime: str) -> None:
    """Brownian bounds in terms of L = L_f(Sigma)."""
    inp, tol = c.inp, c.tol
    if regime == ODE:
        c.theorems.append("constant_noise" if inp.sigma_constant else "brownian_small_noise")
        c.clock_upper(1.0)
        if inp.sigma_constant:
            c.add(judge("unbounded", inp.max_abs, lo=10.0))
        return
    if regime == FORCING:
        c.theorems.append("brownian_noise_dominates")
        c.tail("x_over_sigma_limsup", "x_over_sigma", inp.xs_tail, "limsup", 1.0 - tol, 1.0 + tol)
        c.tail("x_over_sigma_liminf", "x_over_sigma", inp.xs_tail, "liminf", -1.0 - tol, -1.0 + tol)
        c.add(judge("x_minus_z_over_sigma", inp.xzs_last, hi=tol))
        return
    c.theorems.append("brownian_clock_bound")
    c.clock_upper(1.0 + L.hi)
    if regime != HIGH:
        return
    c.theorems.append("brownian_fluctuation_bounds")
    _g, g_u = bounds(L.lo)
    c.tail("x_over_sigma_upper", "x_over_sigma", inp.xs_tail, "limsup", hi=g_u * (1.0 + tol))
    c.tail("x_over_sigma_lower", "x_over_sigma", inp.xs_tail, "liminf", lo=-g_u * (1.0 + tol))
    if L.lo > 2.0:
        c.theorems.append("brownian_recurrence")
        c.tail("recurrence_low", "x_over_sigma", inp.xs_tail, "liminf", hi=(2.0 - L.lo) / (L.lo - 1.0) + tol)
        c.tail("recurrence_high", "x_over_sigma", inp.xs_tail, "limsup", lo=(L.lo - 2.0) / (L.lo - 1.0) - tol)
    else:
        c.notes["recurrence"] = "open for L_f(Sigma) in (1, 2]; fluctuation statistics only"


def _brownian(c: _Checks, regime: str) -> None:
    inp, tol = c.inp, c.tol
    if inp.sigma_square_integrable:
        c.theorems.append("brownian_small_noise")
        c.notes["sigma"] = "sigma is square integrable, so L_f(Sigma) = 0"
        c.clock_upper(1.0)
        return
    tr = inp.trend
    if tr is None:
        _sigma_checks(c, inp.L, regime)
        return
    lam = tr.ratio
    if regime == ODE and tr.L_H0.flag == ZERO:
        c.theorems.append("trend_small")
        c.clock_upper(1.0)
    elif lam.flag == INFINITE and regime == FORCING:
        c.theorems.append("noise_dominates_trend")
        c.tail("x_over_sigma_limsup", "x_over_sigma", inp.xs_tail, "limsup", 1.0 - tol, 1.0 + tol)
        c.tail("x_over_sigma_liminf", "x_over_sigma", inp.xs_tail, "liminf", -1.0 - tol, -1.0 + tol)
    elif lam.flag == ZERO and tr.L_H0.flag == INFINITE:
        c.theorems.append("trend_dominates")
        c.tail("x_over_H0_limsup", "x_over_H0", tr.xh0_tail, "limsup", 1.0 - tol, 1.0 + tol)
        c.notes["x_over_H0_liminf"] = "stated liminf X/H0 = -1 is not checked for a nonnegative trend"
    else:
        c.notes["trend"] = "Sigma/H0 limit and L values fall outside the covered cases"
        c.add(not_applicable("trend", "uncovered combination"))


def _stable(c: _Checks, regime: str) -> None:
    inp, tol, L = c.inp, c.tol, c.inp.L
    if inp.integrable is None:
        c.add(not_applicable("stable_envelope", "no envelope integrability decision"))
        return
    if not inp.integrable:
        c.notes["envelope"] = "int gamma**-alpha diverges: limsup |X|/gamma = inf expected"
        c.add(not_applicable("x_over_gamma_upper", "envelope not integrable"))
        return
    if regime == ODE:
        c.theorems.append("stable_small_noise")
        c.clock_upper(1.0)
    elif regime == FORCING:
        c.theorems.append("stable_envelope_bound")
        c.tail("x_over_gamma_upper", "x_over_gamma", inp.xg_tail, "limsup", hi=tol)
    elif regime == HIGH:
        c.theorems.append("stable_envelope_bound")
        c.tail("x_over_gamma_upper", "x_over_gamma", inp.xg_tail, "limsup", hi=(1.0 / L.lo) * (1.0 + tol))
    else:
        c.notes["envelope"] = "no prediction for L_f(gamma) in (0, 1]"
        c.add(not_applicable("x_over_gamma_upper", "needs L_f(gamma) = 0 or > 1"))


def classify(inp: ClassifyInputs) -> RegimeReport:
    if inp.mode not in MODES:
        raise ValueError(f"unknown analysis mode {inp.mode!r}; expected one of {MODES}")
    regime = regime_for(inp.L, inp.zero_threshold, inp.inf_threshold)
    c = _Checks(inp)
    {"deterministic": _deterministic, "envelope": _envelope, "brownian": _brownian, "stable": _stable}[inp.mode](c, regime)

    g_l, g_u = bounds(inp.L.value)
    report = RegimeReport(
        mode=inp.mode,
        L=inp.L,
        regime=regime,
        G_L=g_l,
        G_U=g_u,
        theorems=tuple(c.theorems),
        checks=tuple(c.checks),
        notes=c.notes,
        tolerance=inp.tolerance,
        zero_threshold=inp.zero_threshold,
        inf_threshold=inp.inf_threshold,
        traces=dict(inp.traces),
        tails=dict(inp.tails),
    )
    failed = [ch.name for ch in report.checks if ch.status == FAIL]
    if failed:
        debug_log(f"classify: {regime} ({inp.mode}) failed checks: {', '.join(failed)}")
    return report
