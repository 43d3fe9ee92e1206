"""Report files written by the CLI: JSON summaries and CSV tables."""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path
from typing import Any, Iterable

import numpy as np
import pandas as pd

from cosimpc.diagnostics import REPORT_SCHEMA, environment_info, redact_value
from cosimpc.engine import ConvergenceReport
from cosimpc.scenario import Scenario

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.10g"


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(key): _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, Path):
        return str(value)
    return value


def export_to_json_file(data: Any, path: str | Path) -> Path:
    """Serialize ``data`` to ``path`` as indented JSON."""

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(data), indent=2) + "\n", encoding="utf-8")
    return path


def export_frame(frame: pd.DataFrame, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    return path


def scenario_provenance(scenario: Scenario) -> dict[str, Any]:
    return {
        "name": scenario.doc.name,
        "variant": scenario.variant,
        "path": str(scenario.path) if scenario.path else None,
        "sha256": scenario.content_hash,
        "seed": scenario.seed,
    }


def build_run_report(outcome, command: str) -> dict[str, Any]:
    """Everything about one run in a single JSON-ready document.

    ``iterations`` lists every MPC solve exactly once, in time order.
    """

    diagnostics = outcome.diagnostics
    report = {
        "schema": REPORT_SCHEMA,
        "command": command,
        "scenario": scenario_provenance(outcome.scenario),
        "kpis": outcome.kpis.to_dict() if outcome.kpis else None,
        "solver": {
            "summary": outcome.kpis.solver if outcome.kpis else {},
            "iterations": diagnostics.to_dict(orient="records") if diagnostics is not None else [],
        },
        "violations": outcome.violations,
        "runtime": outcome.runtime,
        "environment": environment_info(),
    }
    return redact_value(_jsonable(report))


def write_run_outputs(outcome, out_dir: str | Path, command: str) -> list[Path]:
    """Write run_report.json and the result CSVs of one run into ``out_dir``."""

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [export_to_json_file(build_run_report(outcome, command), out_dir / "run_report.json")]
    probes = [slot for slot in outcome.scenario.doc.probes if slot in outcome.results.series]
    if probes:
        paths += outcome.results.write_probe_csvs(out_dir / "probes", probes)
    for module_id, plant in outcome.plants().items():
        paths.append(export_frame(plant.frame(), out_dir / f"plant_{module_id}.csv"))
    if outcome.diagnostics is not None:
        paths.append(export_frame(outcome.diagnostics, out_dir / "mpc_diagnostics.csv"))
    if outcome.kpis is not None:
        paths.append(export_frame(outcome.kpis.to_frame(), out_dir / "kpis.csv"))
    for module_id, trace in outcome.logic_traces().items():
        paths.append(export_frame(trace, out_dir / f"logic_trace_{module_id}.csv"))
    logger.info("wrote %d report files to %s", len(paths), out_dir)
    return paths


def write_comparison(comparison, scenario: Scenario, out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    paths = []
    for name, outcome in comparison.outcomes.items():
        paths += write_run_outputs(outcome, out_dir / name, "compare")
    document = {
        "schema": REPORT_SCHEMA,
        "scenario": scenario_provenance(scenario),
        **comparison.to_dict(),
        "environment": environment_info(),
    }
    paths.append(export_to_json_file(redact_value(_jsonable(document)), out_dir / "comparison.json"))
    paths.append(export_frame(comparison.summary_frame(), out_dir / "comparison.csv"))
    return paths


def write_convergence(report: ConvergenceReport, scenario: Scenario, out_dir: str | Path) -> Path:
    document = {
        "schema": REPORT_SCHEMA,
        "scenario": scenario_provenance(scenario),
        **report.to_dict(),
        "environment": environment_info(),
    }
    return export_to_json_file(redact_value(_jsonable(document)), Path(out_dir) / "convergence.json")


def write_table(rows: pd.DataFrame | Iterable[dict[str, Any]], path: str | Path) -> Path:
    frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows))
    return export_frame(frame, path)
