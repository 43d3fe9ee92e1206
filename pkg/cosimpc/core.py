"""Command-line front end.

Exit codes: 0 ok, 2 invalid scenario or model, 3 runtime failure, 4 solver
found no feasible plan. Errors are also printed to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Any, Callable

from cosimpc import __version__
from cosimpc.benchmark import run_benchmark
from cosimpc.config import default_output_dir, feature_enabled
from cosimpc.errors import (
    CosimError,
    InfeasibleProblem,
    LogicModelError,
    ModuleStepFailure,
    ParseError,
    ScenarioError,
)
from cosimpc.history import format_started_at, list_runs, save_run
from cosimpc.reports import write_comparison, write_convergence, write_run_outputs, write_table
from cosimpc.runner import (
    compare_variants,
    resolve_output_dir,
    run_convergence,
    run_scenario,
    run_sweep,
)
from cosimpc.scenario import BASE_VARIANT, Scenario, load_scenario, validate_scenario

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_RUNTIME = 3
EXIT_INFEASIBLE = 4

STATUS_BY_CODE = {EXIT_OK: "ok", EXIT_INVALID: "invalid", EXIT_RUNTIME: "failed", EXIT_INFEASIBLE: "infeasible"}


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def exit_code_for(error: BaseException) -> int:
    if isinstance(error, (ScenarioError, LogicModelError, ParseError)):
        return EXIT_INVALID
    if isinstance(error, InfeasibleProblem):
        return EXIT_INFEASIBLE
    if isinstance(error, ModuleStepFailure):
        if isinstance(error.cause, InfeasibleProblem):
            return EXIT_INFEASIBLE
        if isinstance(error.cause, (LogicModelError, ParseError)):
            return EXIT_INVALID
    return EXIT_RUNTIME


def error_payload(error: BaseException) -> dict[str, Any]:
    payload: dict[str, Any] = {"error": type(error).__name__, "message": str(error)}
    if isinstance(error, ScenarioError):
        payload["errors"] = error.errors
    if isinstance(error, ModuleStepFailure):
        payload["module"] = error.module_id
        payload["tick"] = error.tick
        payload["cause"] = type(error.cause).__name__
        cause = error.cause
    else:
        cause = error
    if isinstance(cause, InfeasibleProblem):
        payload["status"] = cause.status
        payload["lp_path"] = cause.lp_path
    payload.setdefault("errors", [str(error)])
    return payload


def _load(args: argparse.Namespace) -> Scenario:
    print(f"📦 Loading scenario {args.scenario}")
    scenario = load_scenario(args.scenario, seed=getattr(args, "seed", None))
    gap = getattr(args, "gap", None)
    if gap is not None:
        scenario = scenario.with_patch({"solver": {"rel_gap_tol": gap}})
    variant = getattr(args, "variant", None)
    if variant:
        scenario = scenario.with_variant(variant)
    return scenario


def cmd_validate(args: argparse.Namespace) -> dict[str, Any]:
    scenario = _load(args)
    errors = validate_scenario(scenario)
    for name in scenario.variant_names():
        try:
            errors += [f"variants.{name}: {message}" for message in validate_scenario(scenario.with_variant(name))]
        except ScenarioError as error:
            errors += error.errors
    if errors:
        raise ScenarioError(errors)
    print(f"✅ Scenario {scenario.doc.name} is valid ({len(scenario.doc.modules)} modules, {len(scenario.variant_names())} variants)")
    return {}


def _report_outcome(outcome, out_dir: Path, command: str) -> dict[str, Any]:
    paths = write_run_outputs(outcome, out_dir, command)
    kpis = outcome.kpis
    if kpis is not None:
        print(
            f"✅ {outcome.scenario.label}: biomass share {kpis.biomass_share:.1%}, "
            f"cost {kpis.total_cost_eur:,.0f} EUR, {kpis.biomass_stops} biomass stops"
        )
        if kpis.violation_count:
            print(f"⚠️ {kpis.violation_count} plant violations recorded")
    else:
        print(f"✅ {outcome.scenario.label}: {outcome.results.ticks_run} ticks simulated")
    if outcome.results.stopped_early:
        print(f"⚠️ Run stopped early after {outcome.results.ticks_run} ticks")
    print(f"💾 {len(paths)} report files saved to {out_dir}")
    return kpis.to_dict() if kpis else {}


def cmd_run(args: argparse.Namespace) -> dict[str, Any]:
    scenario = _load(args)
    outcome = run_scenario(scenario)
    return _report_outcome(outcome, resolve_output_dir(scenario, args.out), "run")


def cmd_mpc(args: argparse.Namespace) -> dict[str, Any]:
    scenario = _load(args)
    outcome = run_scenario(scenario, require_mpc=True)
    if outcome.diagnostics is not None:
        print(f"📦 {len(outcome.diagnostics)} MPC iterations solved")
    return _report_outcome(outcome, resolve_output_dir(scenario, args.out), "mpc")


def cmd_compare(args: argparse.Namespace) -> dict[str, Any]:
    scenario = _load(args)
    comparison = compare_variants(scenario, args.variants)
    out_dir = resolve_output_dir(scenario, args.out)
    paths = write_comparison(comparison, scenario, out_dir)
    for name, deltas in comparison.deltas.items():
        print(
            f"✅ {name} vs {comparison.baseline}: biomass share {deltas['biomass_share']:+.2%}, "
            f"cost {deltas['total_cost_rel']:+.2%}"
        )
    print(f"💾 {len(paths)} report files saved to {out_dir}")
    return {"baseline": comparison.baseline, "deltas": comparison.deltas}


def cmd_convergence(args: argparse.Namespace) -> dict[str, Any]:
    scenario = _load(args)
    report = run_convergence(scenario, args.multipliers)
    out_dir = resolve_output_dir(scenario, args.out)
    path = write_convergence(report, scenario, out_dir)
    for slot, differences in report.differences.items():
        trend = ", ".join(f"{value:.3g}" for value in differences)
        print(f"✅ {slot}: successive differences {trend}")
    print(f"💾 Convergence report saved to {path}")
    return report.to_dict()


def cmd_sweep(args: argparse.Namespace) -> dict[str, Any]:
    scenario = _load(args)
    table = run_sweep(scenario, args.capacities)
    out_dir = resolve_output_dir(scenario, args.out)
    path = write_table(table, out_dir / "sweep.csv")
    for row in table.to_dict(orient="records"):
        print(f"✅ {row['capacity_mwh']:g} MWh: biomass share {row['biomass_share']:.1%}, cost {row['total_cost_eur']:,.0f} EUR")
    print(f"💾 Sweep table saved to {path}")
    return {"rows": table.to_dict(orient="records")}


def cmd_benchmark(args: argparse.Namespace) -> dict[str, Any]:
    solver = {"rel_gap_tol": args.gap} if args.gap is not None else None
    table = run_benchmark(solve=not args.no_solve, solver=solver)
    out_dir = Path(args.out).expanduser() if args.out else default_output_dir() / "benchmark"
    path = write_table(table, out_dir / "benchmark.csv")
    for row in table.to_dict(orient="records"):
        line = f"✅ {row['case']}: {row['variables']} variables, built in {row['formulate_s'] * 1000:.1f} ms"
        if row.get("status"):
            line += f", {row['status']} in {row['solve_s']:.2f} s"
        print(line)
    print(f"💾 Benchmark table saved to {path}")
    return {}


def cmd_history(args: argparse.Namespace) -> dict[str, Any]:
    runs = list_runs(args.limit)
    if not runs:
        print("📦 No runs recorded yet.")
    for run in runs:
        share = run["kpis"].get("biomass_share")
        share_text = f", biomass share {share:.1%}" if isinstance(share, (int, float)) else ""
        print(f"{run['id']:>4}  {format_started_at(run['started_at'])}  {run['command']:<12} {run['status']:<10} {run['scenario_path'] or '-'}{share_text}")
    return {}


COMMANDS: dict[str, Callable[[argparse.Namespace], dict[str, Any]]] = {
    "validate": cmd_validate,
    "run": cmd_run,
    "mpc": cmd_mpc,
    "compare": cmd_compare,
    "convergence": cmd_convergence,
    "sweep": cmd_sweep,
    "benchmark": cmd_benchmark,
    "history": cmd_history,
}

RECORDED_COMMANDS = {"run", "mpc", "compare", "convergence", "sweep"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cosimpc", description="Co-simulate district-heating plants with MPC or rule-based control.")
    parser.add_argument("--version", action="version", version=f"cosimpc {__version__}")
    parser.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    subparsers = parser.add_subparsers(dest="command", required=True)

    def scenario_command(name: str, help_text: str) -> argparse.ArgumentParser:
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("scenario", help="Scenario JSON file.")
        sub.add_argument("--out", help="Output directory (default: scenario output_dir or ~/.cosimpc/output/<name>).")
        sub.add_argument("--seed", type=int, help="Override the scenario seed.")
        sub.add_argument("--gap", type=float, help="Relative MIP gap tolerance for every MPC solve.")
        return sub

    validate = subparsers.add_parser("validate", help="Check a scenario's schema, data and wiring.")
    validate.add_argument("scenario", help="Scenario JSON file.")
    for name, help_text in (("run", "Run a scenario."), ("mpc", "Run a scenario that contains an MPC module.")):
        sub = scenario_command(name, help_text)
        sub.add_argument("--variant", help=f"Named variant to run (default: {BASE_VARIANT}).")
    compare = scenario_command("compare", "Run several variants on the same data and report KPI deltas.")
    compare.add_argument("--variants", type=lambda text: [part for part in text.split(",") if part], help="Comma-separated variant names.")
    convergence = scenario_command("convergence", "Rerun with scaled coupling periods and compare probes.")
    convergence.add_argument("--multipliers", type=_int_list, help="Comma-separated period multipliers, e.g. 1,2,4,8.")
    sweep = scenario_command("sweep", "Run once per storage capacity.")
    sweep.add_argument("--capacities", type=_float_list, help="Comma-separated capacities in MWh, e.g. 0,1,2,4.")
    benchmark = subparsers.add_parser("benchmark", help="Time formulation and solves of reference problems.")
    benchmark.add_argument("--out", help="Output directory.")
    benchmark.add_argument("--gap", type=float, help="Relative MIP gap tolerance.")
    benchmark.add_argument("--no-solve", action="store_true", help="Only time the formulations.")
    history = subparsers.add_parser("history", help="List recorded runs.")
    history.add_argument("--limit", type=int, default=10)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    started = time.time()
    scenario_path = str(Path(args.scenario).expanduser().resolve()) if getattr(args, "scenario", None) else None
    summary: dict[str, Any] = {}
    try:
        summary = COMMANDS[args.command](args)
        code = EXIT_OK
    except CosimError as error:
        code = exit_code_for(error)
        print(f"❌ {error}")
        print(json.dumps(error_payload(error)), file=sys.stderr)
    except (ValueError, OSError) as error:
        code = EXIT_RUNTIME
        print(f"❌ {error}")
        print(json.dumps(error_payload(error)), file=sys.stderr)
    if args.command in RECORDED_COMMANDS and feature_enabled("RUN_HISTORY"):
        scenario_hash = None
        try:
            scenario_hash = load_scenario(args.scenario).content_hash
        except ScenarioError:
            pass
        save_run(
            args.command,
            scenario_path,
            scenario_hash,
            started,
            time.time() - started,
            STATUS_BY_CODE[code],
            summary if args.command in {"run", "mpc"} else {},
        )
    return code
