"""Command-line entry point.

Subcommands::

    plan      optimize a plan (minimal time, or inner-only with --fixed-time)
    evaluate  re-evaluate a stored plan, possibly under another ripple setting
    coverage  coverage grid of a stored plan
    rec-grid  sample the domain/ripple gating functions
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from .optimize import InfeasibleBracket, OptimizationError, PlanResult, evaluate_fixed_plan, initial_guesses
from .optimize import inner_minimize_risk, outer_min_time, plan_trajectories
from .outputs import plan_to_json, read_plan, write_function_grid, write_outputs, write_ripple_curve
from .risk import coverage_grid
from .scenario import ScenarioError, format_scenario, parse_scenario, parse_scenario_text
from .seabed import function_grid

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE = 0, 1, 2

log = logging.getLogger("mcmplan")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _on_off(text):
    low = text.lower()
    if low not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return low == "on"


def build_parser():
    parser = _Parser(prog="mcmplan", description="Minimum-time MCM search planning with sand ripples.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    def common(p, scenario_required):
        p.add_argument("--scenario", type=Path, required=scenario_required)
        p.add_argument("--out", type=Path, required=True)
        p.add_argument("--ripples", type=_on_off, default=None, help="on|off; default: scenario setting")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--samples", type=int, default=None, help="Monte Carlo samples used while optimizing")
        p.add_argument("--report-samples", type=int, default=None, help="Monte Carlo samples for the reported risk")
        p.add_argument("--resolution", type=int, nargs=2, default=(100, 100), metavar=("NX", "NY"))
        p.add_argument("--label", default=None)
        p.add_argument("--threads", type=int, default=None, help="numba worker threads")

    p = sub.add_parser("plan", help="optimize trajectories")
    common(p, True)
    p.add_argument("--fixed-time", type=float, default=None, metavar="S", help="skip the time search; minimize risk at S")

    p = sub.add_parser("evaluate", help="evaluate a stored plan")
    common(p, False)
    p.add_argument("--plan", type=Path, required=True)

    p = sub.add_parser("coverage", help="coverage grid of a stored plan")
    common(p, False)
    p.add_argument("--plan", type=Path, required=True)

    p = sub.add_parser("rec-grid", help="sample the domain and ripple functions")
    p.add_argument("--scenario", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--nx", type=int, default=101)
    p.add_argument("--ny", type=int, default=101)
    p.add_argument("--heading-deg", type=float, default=45.0)
    return parser


def _apply_overrides(scenario, args):
    changes = {}
    if args.ripples is not None:
        changes["ripples"] = args.ripples
    if args.samples is not None:
        changes["mc_samples_opt"] = args.samples
    if args.report_samples is not None:
        changes["mc_samples_report"] = args.report_samples
    if args.label is not None:
        changes["label"] = args.label
    if args.seed is not None:
        from dataclasses import replace

        changes["opt"] = replace(scenario.opt, seed=args.seed)
    return scenario.replace(**changes) if changes else scenario


def _finish(scenario, schedules, result, out, label, plan_json=None, resolution=(100, 100)):
    trajs = plan_trajectories(scenario, schedules)
    sensors = [v.sensor for v in scenario.world_vehicles()]
    report = evaluate_fixed_plan(scenario, schedules, sample=scenario.report_sample())
    grid = coverage_grid(trajs, tuple(resolution), sensors, scenario.world_domain(), scenario.field)
    write_outputs(result, report, grid, out, trajs, label=label, plan_json=plan_json)
    return report


def _cmd_plan(args):
    scenario = _apply_overrides(parse_scenario(args.scenario), args)
    label = scenario.label or ("ripples" if scenario.ripples else "no-ripples")
    if args.fixed_time is not None:
        if args.fixed_time <= 0:
            raise ScenarioError("must be positive", key="--fixed-time")
        start = time.perf_counter()
        sample = scenario.opt_sample()
        best = None
        iters = 0
        for init in initial_guesses(scenario, args.fixed_time):
            scheds, risk, it = inner_minimize_risk(scenario, args.fixed_time, init, sample)
            iters += it
            if best is None or risk < best[1]:
                best = (scheds, risk)
        result = PlanResult(args.fixed_time, best[0], best[1], iters, time.perf_counter() - start,
                            [(args.fixed_time, best[1], best[1] <= scenario.risk_threshold)])
    else:
        result = outer_min_time(scenario)
    plan_json = plan_to_json(result, format_scenario(scenario), label, scenario.ripples)
    report = _finish(scenario, result.schedules, result, args.out, label, plan_json, args.resolution)
    print(f"{label}: risk={100 * report.residual_risk:.2f}% mission={result.mission_time:.2f}s "
          f"compute={result.wall_clock:.2f}s")
    return EXIT_OK


def _load_plan(args):
    doc, schedules = read_plan(args.plan)
    scenario = parse_scenario(args.scenario) if args.scenario else parse_scenario_text(doc["scenario"], str(args.plan))
    scenario = scenario.replace(ripples=doc["ripples"])
    scenario = _apply_overrides(scenario, args)
    if len(schedules) != len(scenario.vehicles):
        raise ScenarioError(f"plan has {len(schedules)} schedules for {len(scenario.vehicles)} vehicles")
    return doc, schedules, scenario


def _cmd_evaluate(args):
    doc, schedules, scenario = _load_plan(args)
    label = args.label or f"{doc.get('label') or 'plan'}/{'ripples' if scenario.ripples else 'no-ripples'}"
    report = _finish(scenario, schedules, None, args.out, label, resolution=args.resolution)
    print(f"{label}: risk={100 * report.residual_risk:.2f}% mission={report.mission_time:.2f}s")
    return EXIT_OK


def _cmd_coverage(args):
    doc, schedules, scenario = _load_plan(args)
    trajs = plan_trajectories(scenario, schedules)
    grid = coverage_grid(trajs, tuple(args.resolution), [v.sensor for v in scenario.world_vehicles()],
                         scenario.world_domain(), scenario.field)
    args.out.mkdir(parents=True, exist_ok=True)
    grid.to_csv(args.out / "coverage.csv")
    grid.to_pgm(args.out / "coverage.pgm")
    return EXIT_OK


def _cmd_rec_grid(args):
    scenario = parse_scenario(args.scenario)
    field = scenario.ripple_field()
    heading = math.radians(args.heading_deg)
    args.out.mkdir(parents=True, exist_ok=True)
    write_function_grid(function_grid(field, args.nx, args.ny, heading), heading, args.out / "rec_grid.csv")
    write_ripple_curve(field, args.out / "ripple_gain.csv")
    return EXIT_OK


COMMANDS = {"plan": _cmd_plan, "evaluate": _cmd_evaluate, "coverage": _cmd_coverage, "rec-grid": _cmd_rec_grid}


def _set_threads(n):
    if n < 1:
        return "--threads must be >= 1"
    try:
        import numba
    except ImportError:  # numpy backend is single-threaded
        return None
    if n > numba.config.NUMBA_NUM_THREADS:
        return (f"--threads {n} exceeds the numba pool of {numba.config.NUMBA_NUM_THREADS}; "
                f"set NUMBA_NUM_THREADS={n} in the environment")
    numba.set_num_threads(n)
    return None


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    if getattr(args, "threads", None):
        err = _set_threads(args.threads)
        if err:
            print(f"mcmplan: {err}", file=sys.stderr)
            return EXIT_INVALID
    try:
        return COMMANDS[args.command](args)
    except InfeasibleBracket as exc:
        print(f"mcmplan: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OptimizationError as exc:
        print(f"mcmplan: optimization failed: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ScenarioError, ValueError, OSError) as exc:
        print(f"mcmplan: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
