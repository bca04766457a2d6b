"""
Canned example runs with their expected limits.

Each example loads `scenarios/<id>.cfg`, runs it (one path, or an ensemble
for the stochastic ones) and judges a short list of assertions. A band
assertion on a tail passes when the whole tail (liminf and limsup over
[T/2, T]) lies inside the band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

from .asymptotics import FAIL, FORCING, ODE, PASS, Check, RegimeReport, TailStats, judge
from .config import load_scenario, resolve_seed
from .ensemble import EnsembleReport, run_ensemble
from .errors import ConfigError
from .forcing import GOLDEN_A, expression_envelope
from .noise import envelope_integrability
from .scenario import Scenario, analyse, build_scenario, run_path
from .solver import Trajectory

EXAMPLES = ("golden", "L1", "Lgt1", "Linf", "gamma_plus", "sigma_const", "stoch1", "stoch2")

GOLDEN_RATIO = (1.0 + math.sqrt(5.0)) / 2.0
INTEGRABILITY_GRID = tuple((eps, alpha) for eps in ("0.5", "0.9", "1/alpha", "2") for alpha in (0.6, 1.0, 1.5))


@dataclass(frozen=True, eq=False)
class Reproduction:
    example: str
    assertions: tuple[Check, ...]
    report: Union[RegimeReport, EnsembleReport]
    scenario: Scenario
    trajectory: Optional[Trajectory] = None

    @property
    def passed(self) -> bool:
        return all(c.status == PASS for c in self.assertions)

    def items(self) -> list[tuple[str, object]]:
        out: list[tuple[str, object]] = [("example", self.example), ("passed", self.passed)]
        checks = sorted(self.assertions, key=lambda c: c.name)
        out += [(f"checks.{c.name}", c.status) for c in checks]
        out += [(f"value.{c.name}", c.value) for c in checks]
        out += [(f"bound.{c.name}", (c.lo, c.hi)) for c in checks]
        out += [(f"detail.{c.name}", c.detail) for c in checks if c.detail]
        return out


def tail_band(name: str, tail: Optional[TailStats], lo: float, hi: float) -> Check:
    if tail is None:
        return Check(name, FAIL, lo=lo, hi=hi, detail="tail not measured")
    inside = lo <= tail.liminf and tail.limsup <= hi
    return Check(name, PASS if inside else FAIL, tail.limsup, lo, hi, detail=f"liminf {tail.liminf:.6g}")


def around(name: str, tail: Optional[TailStats], center: float, rel: float) -> Check:
    return tail_band(name, tail, center * (1.0 - rel), center * (1.0 + rel))


def fraction_check(name: str, flags: list[bool], required: float) -> Check:
    frac = sum(flags) / len(flags) if flags else math.nan
    return judge(name, frac, lo=required, detail=f"{sum(flags)} of {len(flags)} paths")


def _single(sc: Scenario) -> tuple[Trajectory, RegimeReport]:
    traj = run_path(sc, 0)
    return traj, analyse(sc, traj)


def _golden(sc: Scenario) -> tuple:
    traj, rep = _single(sc)
    return traj, rep, [
        tail_band("clock_ratio_tail", rep.tails.get("clock_ratio"), GOLDEN_RATIO - 0.08, GOLDEN_RATIO + 0.08),
        around("x_over_H_tail", rep.tails.get("x_over_H"), GOLDEN_A, 0.05),
    ]


def _L1(sc: Scenario) -> tuple:
    traj, rep = _single(sc)
    xh = rep.traces.get("x_over_H")
    rising = xh is not None and xh.rising()
    last = xh.last if xh is not None else math.nan
    return traj, rep, [
        judge("L_estimate", rep.L.value, 0.8, 1.3, detail=f"interval [{rep.L.lo:.6g}, {rep.L.hi:.6g}]"),
        Check("regime_intermediate", PASS if rep.regime not in {ODE, FORCING} else FAIL, detail=rep.regime),
        Check("x_over_H_rising", PASS if rising and last >= 5.0 else FAIL, last, 5.0, math.inf),
    ]


def _Lgt1(sc: Scenario) -> tuple:
    traj, rep = _single(sc)
    L = float(sc.config.forcing.params[0])
    return traj, rep, [
        around("x_over_H_tail", rep.tails.get("x_over_H"), L / (L - 1.0), 0.10),
        around("clock_ratio_tail", rep.tails.get("clock_ratio"), L, 0.10),
    ]


def _Linf(sc: Scenario) -> tuple:
    traj, rep = _single(sc)
    clock = rep.traces["clock_ratio"]
    grows = clock.last >= 10.0 and clock.rising()
    return traj, rep, [
        around("x_over_H_tail", rep.tails.get("x_over_H"), 1.0, 0.05),
        Check("clock_diverges", PASS if grows else FAIL, clock.last, 10.0, math.inf),
    ]


def _gamma_plus(sc: Scenario) -> tuple:
    traj, rep = _single(sc)
    alpha = float(sc.config.analysis.envelope_clock)
    beta = float(sc.config.nonlinearity.beta)
    tail = rep.tails.get("x_over_gamma")
    L = rep.L.value
    return traj, rep, [
        around("x_over_gamma_tail", tail, alpha ** (-1.0 / (1.0 - beta)), 0.10),
        judge("x_over_gamma_limsup", tail.limsup if tail else math.nan, hi=1.0 / L if L > 0 else math.inf),
    ]


def _sigma_const(sc: Scenario, rep: EnsembleReport) -> list[Check]:
    clock, unbounded = [], []
    for o in rep.outcomes:
        t = o.tails.get("clock_ratio")
        clock.append(t is not None and t.limsup <= 1.1)
        c = o.check("unbounded")
        unbounded.append(c is not None and c.status == PASS)
    return [
        fraction_check("clock_upper_fraction", clock, 0.95),
        fraction_check("unbounded_fraction", unbounded, 0.95),
    ]


def _stoch1(sc: Scenario, rep: EnsembleReport) -> list[Check]:
    flags = []
    for o in rep.outcomes:
        c = o.check("x_minus_z_over_sigma")
        flags.append(c is not None and c.value <= 0.1)
    merged = next((c for c in rep.merged if c.name == "x_over_sigma_limsup"), None)
    return [
        fraction_check("x_minus_z_over_sigma_fraction", flags, 0.9),
        judge("merged_x_over_sigma_limsup", merged.value if merged else math.nan, 0.6, 1.4),
    ]


def integrability_grid() -> list[Check]:
    """Numeric decisions for (1+t)**eps against the p-integral rule eps*alpha > 1."""
    out = []
    for eps_text, alpha in INTEGRABILITY_GRID:
        eps = 1.0 / alpha if eps_text == "1/alpha" else float(eps_text)
        env = expression_envelope(f"(1 + t)**{eps!r}")
        got = envelope_integrability(env, alpha)
        want = "finite" if eps * alpha > 1.0 + 1e-9 else "infinite"
        out.append(Check(f"eps={eps_text},alpha={alpha:g}", PASS if got == want else FAIL, detail=got))
    return out


def _stoch2(sc: Scenario, rep: EnsembleReport) -> list[Check]:
    flags = []
    for o in rep.outcomes:
        t = o.tails.get("clock_ratio")
        flags.append(t is not None and t.limsup <= 1.15)
    grid = integrability_grid()
    matched = sum(1 for c in grid if c.status == PASS)
    return [
        fraction_check("clock_upper_fraction", flags, 0.9),
        Check(
            "integrability_grid",
            PASS if matched == len(grid) else FAIL,
            float(matched),
            float(len(grid)),
            float(len(grid)),
            detail=",".join(c.name for c in grid if c.status != PASS) or "all match",
        ),
    ]


_DETERMINISTIC = {"golden": _golden, "L1": _L1, "Lgt1": _Lgt1, "Linf": _Linf, "gamma_plus": _gamma_plus}
_STOCHASTIC = {"sigma_const": _sigma_const, "stoch1": _stoch1, "stoch2": _stoch2}


def reproduce(
    example_id: str,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
    environ: Optional[dict] = None,
) -> Reproduction:
    if example_id not in EXAMPLES:
        raise ConfigError(f"unknown example {example_id!r}; expected one of {', '.join(EXAMPLES)}")
    cfg = resolve_seed(load_scenario(example_id), seed, environ)
    sc = build_scenario(cfg)
    if example_id in _STOCHASTIC:
        rep = run_ensemble(cfg, workers)
        return Reproduction(example_id, tuple(_STOCHASTIC[example_id](sc, rep)), rep, sc)
    traj, rep, checks = _DETERMINISTIC[example_id](sc)
    return Reproduction(example_id, tuple(checks), rep, sc, traj)
