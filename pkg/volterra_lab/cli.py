from __future__ import annotations

import argparse
import os
import sys
from typing import Optional

import numpy as np

from .config import RunConfig, load, resolve_seed
from .debug import debug_log, enable_debug_trace
from .ensemble import run_ensemble
from .errors import ConfigError, VolterraError
from .reproduce import EXAMPLES, reproduce
from .scenario import Scenario, analyse, build_scenario, run_path, trajectory_rows
from .solver import Problem, Trajectory, refine_and_compare
from .writer import render_csv, render_report, snapshot_indices, write_atomic

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_CHECKS_FAILED = 2


def _write_trajectory(out_dir: str, sc: Scenario, traj: Trajectory, full_dump: bool) -> str:
    last = traj.values.size - 1
    idx = np.arange(last + 1) if full_dump else snapshot_indices(last, sc.config.run.snapshots)
    return write_atomic(os.path.join(out_dir, "trajectory.csv"), render_csv(trajectory_rows(sc, traj, idx)))


def _load(path: str, seed: Optional[int]) -> RunConfig:
    return resolve_seed(load(path), seed)


def cmd_solve(args: argparse.Namespace) -> int:
    sc = build_scenario(_load(args.config, args.seed))
    traj = run_path(sc, 0)
    report = analyse(sc, traj)
    _write_trajectory(args.out, sc, traj, args.full_dump)
    path = write_atomic(os.path.join(args.out, "report.txt"), render_report(report.items()))
    failed = [c.name for c in report.checks if c.status == "fail"]
    print(f"{report.regime}: {len(report.checks)} check(s), {len(failed)} failed -> {path}")
    for name in failed:
        print(f"  failed: {name}", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_CHECKS_FAILED


def cmd_ensemble(args: argparse.Namespace) -> int:
    cfg = _load(args.config, args.seed)
    report = run_ensemble(cfg, args.workers)
    path = write_atomic(os.path.join(args.out, "ensemble.txt"), render_report(report.items()))
    print(f"{report.regime}: {report.paths} path(s) -> {path}")
    return EXIT_OK if report.passed else EXIT_CHECKS_FAILED


def convergence_items(report, levels: int) -> list[tuple[str, object]]:
    out: list[tuple[str, object]] = [
        ("checks.order", "pass" if report.passed else "fail"),
        ("observed_order", report.observed_order),
        ("exact", report.exact),
        ("kind", report.kind),
        ("levels", levels),
    ]
    out += [(f"step.{i}", v) for i, v in enumerate(report.steps)]
    out += [(f"difference.{i}", v) for i, v in enumerate(report.differences)]
    out += [(f"order.{i}", v) for i, v in enumerate(report.orders)]
    return out


def cmd_convergence(args: argparse.Namespace) -> int:
    cfg = _load(args.config, args.seed)
    if cfg.noise.kind == "stable":
        raise ConfigError("convergence studies support deterministic and brownian runs only")
    sc = build_scenario(cfg)
    problem = Problem(
        kernel=sc.kernel,
        nonlinearity=sc.nonlinearity,
        forcing=sc.forcing,
        psi=sc.psi,
        sigma=sc.sigma.sigma if sc.sigma is not None else None,
        seed=cfg.noise.seed,
    )
    levels = cfg.convergence.levels
    report = refine_and_compare(problem, sc.grid, levels)
    path = write_atomic(os.path.join(args.out, "convergence.txt"), render_report(convergence_items(report, levels)))
    print(f"observed order {report.observed_order:.4g} ({report.kind}) -> {path}")
    return EXIT_OK if report.passed else EXIT_CHECKS_FAILED


def cmd_reproduce(args: argparse.Namespace) -> int:
    rep = reproduce(args.example, seed=args.seed, workers=args.workers)
    if rep.trajectory is not None:
        _write_trajectory(args.out, rep.scenario, rep.trajectory, args.full_dump)
        write_atomic(os.path.join(args.out, "report.txt"), render_report(rep.report.items()))
    else:
        write_atomic(os.path.join(args.out, "ensemble.txt"), render_report(rep.report.items()))
    path = write_atomic(os.path.join(args.out, "reproduce.txt"), render_report(rep.items()))
    for c in sorted(rep.assertions, key=lambda c: c.name):
        print(f"  {c.status:4s} {c.name}")
    print(f"{rep.example}: {'pass' if rep.passed else 'fail'} -> {path}")
    return EXIT_OK if rep.passed else EXIT_CHECKS_FAILED


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="volterra_lab", description="Perturbed nonlinear Volterra equation lab")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="./out", help="Output directory (default: ./out)")
    common.add_argument("--seed", type=_u64, default=None, help="Master seed; overrides VOLTERRA_SEED and noise.seed")
    common.add_argument("--full-dump", action="store_true", help="Write every grid point to trajectory.csv")
    common.add_argument("--workers", type=int, default=None, help="Ensemble worker processes (0 = all CPUs)")

    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", parents=[common], help="Integrate one path and classify it")
    p.add_argument("config")
    p.set_defaults(run=cmd_solve)
    p = sub.add_parser("ensemble", parents=[common], help="Run noise.paths independent paths")
    p.add_argument("config")
    p.set_defaults(run=cmd_ensemble)
    p = sub.add_parser("convergence", parents=[common], help="Grid refinement study")
    p.add_argument("config")
    p.set_defaults(run=cmd_convergence)
    p = sub.add_parser("reproduce", parents=[common], help="Run a canned example and check its limits")
    p.add_argument("example", choices=EXAMPLES)
    p.set_defaults(run=cmd_reproduce)
    return ap


def main(argv: list[str]) -> int:
    enable_debug_trace()
    args = build_parser().parse_args(argv)
    debug_log(f"cli: {args.command} {argv!r}")
    try:
        return int(args.run(args))
    except (VolterraError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    raise SystemExit(main(sys.argv[1:]))
