"""
Many independent noise paths of one configuration.

Path k always uses stream k of the master seed, and outcomes are merged
only through counts, maxima and minima in stream order, so the aggregate
does not depend on the worker count or on completion order.
"""

from __future__ import annotations

import concurrent.futures
import multiprocessing
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from .asymptotics import FAIL, NA, PASS, REGIMES, Check, LEstimate, TailStats
from .config import RunConfig, parse, serialize
from .debug import debug_log
from .errors import ConfigError
from .scenario import Analytic, Scenario, analyse, analytic_part, build_scenario, run_path


@dataclass(frozen=True)
class PathOutcome:
    stream: int
    regime: str
    checks: tuple[Check, ...]
    tails: dict = field(default_factory=dict)
    truncated_at: Optional[float] = None

    def check(self, name: str) -> Optional[Check]:
        for c in self.checks:
            if c.name == name:
                return c
        return None


def outcome_for(sc: Scenario, analytic: Analytic, stream: int) -> PathOutcome:
    report = analyse(sc, run_path(sc, stream), analytic)
    return PathOutcome(
        stream=stream,
        regime=report.regime,
        checks=report.checks,
        tails=dict(report.tails),
        truncated_at=report.truncated_at,
    )


_WORKER_SCENARIO: Optional[Scenario] = None
_WORKER_ANALYTIC: Optional[Analytic] = None


def _init_worker(config_text: str) -> None:
    global _WORKER_SCENARIO
    global _WORKER_ANALYTIC
    _WORKER_SCENARIO = build_scenario(parse(config_text, source="<ensemble>"))
    _WORKER_ANALYTIC = analytic_part(_WORKER_SCENARIO)


def _path_task(stream: int) -> PathOutcome:
    if _WORKER_SCENARIO is None or _WORKER_ANALYTIC is None:
        raise RuntimeError("ensemble worker is not initialized")
    return outcome_for(_WORKER_SCENARIO, _WORKER_ANALYTIC, stream)


def _start_method() -> str:
    methods = multiprocessing.get_all_start_methods()
    if os.name == "posix" and "fork" in methods:
        return "fork"
    return "spawn" if "spawn" in methods else methods[0]


def resolve_workers(cfg: RunConfig, flag: Optional[int] = None) -> int:
    w = flag if flag is not None else cfg.run.workers
    if w < 0:
        raise ConfigError(f"--workers must be >= 0, got {w}")
    return w or (os.cpu_count() or 1)


def _run_parallel(text: str, streams: list[int], workers: int) -> list[PathOutcome]:
    futures = {}
    results: dict[int, PathOutcome] = {}
    with concurrent.futures.ProcessPoolExecutor(
        max_workers=workers,
        mp_context=multiprocessing.get_context(_start_method()),
        initializer=_init_worker,
        initargs=(text,),
    ) as executor:
        for stream in streams:
            futures[executor.submit(_path_task, stream)] = stream
        for future in concurrent.futures.as_completed(futures):
            out = future.result()
            results[out.stream] = out
    return [results[k] for k in sorted(results)]


@dataclass(frozen=True, eq=False)
class EnsembleReport:
    config: RunConfig
    mode: str
    L: LEstimate
    outcomes: tuple[PathOutcome, ...]
    fractions: dict
    statuses: dict
    merged: tuple[Check, ...]
    regime_counts: dict
    required_fraction: float

    @property
    def paths(self) -> int:
        return len(self.outcomes)

    @property
    def passed(self) -> bool:
        return all(s != FAIL for s in self.statuses.values()) and all(c.status != FAIL for c in self.merged)

    @property
    def regime(self) -> str:
        top = max(self.regime_counts.values())
        return next(r for r in REGIMES if self.regime_counts.get(r, 0) == top)

    def items(self) -> list[tuple[str, object]]:
        out: list[tuple[str, object]] = [
            ("L", self.L.value),
            ("L_lo", self.L.lo),
            ("L_hi", self.L.hi),
            ("L_flag", self.L.flag),
            ("regime", self.regime),
        ]
        out += [(f"regime_fraction.{r}", self.regime_counts[r] / self.paths) for r in REGIMES if r in self.regime_counts]
        for name in sorted(self.statuses):
            out.append((f"checks.{name}", self.statuses[name]))
            out.append((f"fraction.{name}", self.fractions[name]))
        for c in sorted(self.merged, key=lambda c: c.name):
            out += [
                (f"checks.merged.{c.name}", c.status),
                (f"value.merged.{c.name}", c.value),
                (f"bound.merged.{c.name}", (c.lo, c.hi)),
            ]
        out += [
            ("mode", self.mode),
            ("paths", self.paths),
            ("seed", self.config.noise.seed),
            ("required_fraction", self.required_fraction),
            ("truncated_paths", sum(1 for o in self.outcomes if o.truncated_at is not None)),
        ]
        return out


def _merged_check(outcomes: list[PathOutcome], name: str) -> Optional[Check]:
    proto = next((o.check(name) for o in outcomes if o.check(name) is not None), None)
    if proto is None or ":" not in proto.source:
        return None
    trace, side = proto.source.split(":", 1)
    tails = TailStats.merge_all(o.tails[trace] for o in outcomes if trace in o.tails)
    if tails is None:
        return Check(name, NA, detail=f"no {trace} tails to merge")
    return proto.rejudged(tails.limsup if side == "limsup" else tails.liminf)


def aggregate(
    cfg: RunConfig,
    mode: str,
    L: LEstimate,
    outcomes: list[PathOutcome],
    merged_checks: tuple[str, ...] = (),
    required_fraction: float = 0.95,
) -> EnsembleReport:
    outcomes = sorted(outcomes, key=lambda o: o.stream)
    names = sorted({c.name for o in outcomes for c in o.checks})
    fractions: dict[str, float] = {}
    statuses: dict[str, str] = {}
    for name in names:
        judged = [c for c in (o.check(name) for o in outcomes) if c is not None and c.status != NA]
        if not judged:
            fractions[name], statuses[name] = 0.0, NA
            continue
        frac = sum(1 for c in judged if c.status == PASS) / len(judged)
        fractions[name] = frac
        statuses[name] = PASS if frac >= required_fraction else FAIL
    merged = tuple(c for c in (_merged_check(outcomes, n) for n in merged_checks) if c is not None)
    return EnsembleReport(
        config=cfg,
        mode=mode,
        L=L,
        outcomes=tuple(outcomes),
        fractions=fractions,
        statuses=statuses,
        merged=merged,
        regime_counts=dict(Counter(o.regime for o in outcomes)),
        required_fraction=required_fraction,
    )


def run_ensemble(cfg: RunConfig, workers: Optional[int] = None) -> EnsembleReport:
    if not cfg.stochastic:
        raise ConfigError("ensemble runs need noise.kind = brownian or stable")
    if cfg.noise.paths < 2:
        raise ConfigError(f"ensemble runs need noise.paths >= 2, got {cfg.noise.paths}")
    sc = build_scenario(cfg)
    analytic = analytic_part(sc)
    streams = list(range(cfg.noise.paths))
    w = min(resolve_workers(cfg, workers), len(streams))
    debug_log(f"ensemble: {len(streams)} paths, seed {cfg.noise.seed}, {w} worker(s)")

    if w <= 1:
        outcomes = [outcome_for(sc, analytic, k) for k in streams]
    else:
        outcomes = _run_parallel(serialize(cfg), streams, w)
    return aggregate(cfg, sc.mode, analytic.L, outcomes, cfg.ensemble.merged_checks, cfg.ensemble.required_fraction)
