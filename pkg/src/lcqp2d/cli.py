"""Command-line interface.

Subcommands:
  simulate    run one closed-loop trial of a scenario
  experiment  Monte-Carlo sweep over a noise grid
  solve       solve a complementarity-QP problem file
  render      draw keyframes and complementarity plots from a trial log

Exit codes for `solve`: 0 solved, 2 not solved, 1 bad input. `simulate`
exits 0 on a successful trial, 2 otherwise, 1 on bad input.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np


def _add_noise_args(p):
    p.add_argument("--model-error", type=float, default=None,
                   help="shape perturbation scale (overrides scenario)")
    p.add_argument("--measurement", type=float, default=None,
                   help="measurement noise scale (overrides scenario)")


def build_parser():
    parser = argparse.ArgumentParser(prog="lcqp2d",
                                     description="Planar quasistatic contact-rich "
                                                 "manipulation testbed")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one closed-loop trial")
    sim.add_argument("scenario", help="catalog name or path to a scenario file")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--render", metavar="DIR", default=None,
                     help="write SVG keyframes and plots to DIR")
    sim.add_argument("--out", metavar="CSV", default=None,
                     help="write the trial log to CSV")
    sim.add_argument("--timing-out", metavar="CSV", default=None,
                     help="write per-step solve times (non-deterministic)")
    sim.add_argument("--no-relaxation", action="store_true",
                     help="use strict complementarity pairs in the controller")
    _add_noise_args(sim)

    exp = sub.add_parser("experiment", help="Monte-Carlo sweep over a noise grid")
    exp.add_argument("scenario")
    exp.add_argument("--grid", default="0,1e-7,1e-5,1e-3",
                     help="comma-separated scales, used for both noise axes")
    exp.add_argument("--trials", type=int, default=100)
    exp.add_argument("--seed", type=int, default=0, help="master seed")
    exp.add_argument("--jobs", type=int, default=None)
    exp.add_argument("--no-relaxation", action="store_true")
    exp.add_argument("--out", metavar="CSV", default=None,
                     help="write the success-rate table to CSV")

    sol = sub.add_parser("solve", help="solve a problem file")
    sol.add_argument("problem", help="path to a problem file")

    ren = sub.add_parser("render", help="render a recorded trial log")
    ren.add_argument("record", help="trial CSV written by simulate --out")
    ren.add_argument("--scenario", default=None,
                     help="scenario (defaults to the one named in the log)")
    ren.add_argument("--out", metavar="DIR", required=True)

    sub.add_parser("catalog", help="list shipped scenarios")
    return parser


def _cmd_simulate(args) -> int:
    from .harness import run_trial, write_record, write_timing_sidecar
    from .scenario import ScenarioError, load_scenario

    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    rec = run_trial(scenario, seed=args.seed, model_error=args.model_error,
                    measurement=args.measurement, relaxed=not args.no_relaxation)
    final = ", ".join(f"{v:.4f}" for v in rec.final_q)
    print(f"outcome={rec.outcome} steps={rec.steps} final_q=[{final}]")
    if args.out:
        write_record(rec, args.out)
        print(f"log written to {args.out}")
    if args.timing_out:
        write_timing_sidecar(rec, args.timing_out)
    if args.render:
        from .render import render
        paths = render(rec, args.render, scenario=scenario)
        print(f"{len(paths)} files written to {args.render}")
    return 0 if rec.succeeded else 2


def _cmd_experiment(args) -> int:
    from .harness import run_sweep
    from .scenario import ScenarioError, load_scenario

    try:
        load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        grid = [float(v) for v in args.grid.split(",") if v != ""]
    except ValueError:
        print("error: --grid expects comma-separated numbers", file=sys.stderr)
        return 1
    result = run_sweep(args.scenario, grid, grid, args.trials,
                       master_seed=args.seed, relaxed=not args.no_relaxation,
                       jobs=args.jobs)
    table = result.table(grid, grid)
    print(table, end="")
    if args.out:
        Path(args.out).write_text(table, encoding="utf-8")
    return 0


def _cmd_solve(args) -> int:
    from .lcqp import ProblemFormatError, read_problem, solve

    try:
        problem = read_problem(args.problem)
        problem.validate()
    except (OSError, ProblemFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    sol = solve(problem)
    print(f"status={sol.status}")
    print(f"objective={sol.objective!r}")
    print(f"comp_residual={sol.comp_residual!r}")
    print(f"kkt_residual={sol.kkt_residual!r}")
    print(f"feas_residual={sol.feas_residual!r}")
    for i, v in enumerate(sol.x):
        print(f"x[{i}]={v!r}")
    return 0 if sol.solved else 2


def _cmd_render(args) -> int:
    from .harness import read_record
    from .render import render
    from .scenario import ScenarioError, load_scenario

    try:
        rec = read_record(args.record)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    scenario = None
    if args.scenario:
        try:
            scenario = load_scenario(args.scenario)
        except ScenarioError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    try:
        paths = render(rec, args.out, scenario=scenario)
    except (ScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"{len(paths)} files written to {args.out}")
    return 0


def _cmd_catalog(args) -> int:
    from .scenario import catalog
    for name in catalog():
        print(name)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {
        "simulate": _cmd_simulate,
        "experiment": _cmd_experiment,
        "solve": _cmd_solve,
        "render": _cmd_render,
        "catalog": _cmd_catalog,
    }[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
