"""Orchestration behind the CLI subcommands.

Every entry point takes a loaded Scenario, runs one or more co-simulations and
returns plain result objects; writing files is left to ``cosimpc.reports``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

import pandas as pd

from cosimpc.config import default_output_dir, feature_enabled
from cosimpc.engine import ConvergenceReport, RunResults, convergence_study
from cosimpc.errors import ScenarioError
from cosimpc.kpis import KpiReport, compute_kpis, kpi_deltas
from cosimpc.logic import LogicModule
from cosimpc.modules import SimModule
from cosimpc.mpc import MpcModule
from cosimpc.plants import PlantModule
from cosimpc.scenario import BASE_VARIANT, Scenario, build_cosimulation, check_scenario, load_data
from cosimpc.timebase import TimeVector

logger = logging.getLogger(__name__)


@dataclass
class RunOutcome:
    scenario: Scenario
    results: RunResults
    modules: dict[str, SimModule]
    kpis: KpiReport | None = None
    diagnostics: pd.DataFrame | None = None
    violations: list[dict[str, Any]] = field(default_factory=list)
    runtime: dict[str, Any] = field(default_factory=dict)

    @property
    def variant(self) -> str:
        return self.scenario.variant

    def plants(self) -> dict[str, PlantModule]:
        return {key: module for key, module in self.modules.items() if isinstance(module, PlantModule)}

    def controllers(self) -> dict[str, MpcModule]:
        return {key: module for key, module in self.modules.items() if isinstance(module, MpcModule)}

    def logic_traces(self) -> dict[str, pd.DataFrame]:
        return {
            key: module.trace_frame()
            for key, module in self.modules.items()
            if isinstance(module, LogicModule) and module.trace_rows
        }


def _diagnostics(modules: Mapping[str, SimModule]) -> pd.DataFrame | None:
    frames = []
    for module_id, module in modules.items():
        if isinstance(module, MpcModule) and module.diagnostics:
            frames.append(module.diagnostics_frame().assign(module=module_id))
    if not frames:
        return None
    return pd.concat(frames, ignore_index=True)


def run_scenario(
    scenario: Scenario,
    require_mpc: bool = False,
    data: Mapping[str, TimeVector] | None = None,
) -> RunOutcome:
    """Validate, build and run one scenario (or variant) and summarize it.

    KPIs are computed for the first plant module, MPC diagnostics are gathered
    from every MPC module.
    """

    check_scenario(scenario)
    if require_mpc and not any(block.type == "mpc" for block in scenario.doc.modules.values()):
        raise ScenarioError(["modules: the scenario has no mpc module"])
    built = build_cosimulation(scenario, data=data)
    logger.info("running %s until t=%d", scenario.label, built.t_end)
    results = built.engine.run(built.t_end)
    diagnostics = _diagnostics(built.modules)
    outcome = RunOutcome(scenario, results, built.modules, diagnostics=diagnostics)
    plants = outcome.plants()
    if plants:
        plant = next(iter(plants.values()))
        outcome.violations = plant.violation_log()
        outcome.kpis = compute_kpis(plant.frame(), plant.params, outcome.violations, diagnostics)
    outcome.runtime = {
        "wall_s": results.wall_time_s,
        "ticks": results.ticks_run,
        "stopped_early": results.stopped_early,
        "modules_s": dict(results.module_time_s),
        "mpc_formulate_s": float(diagnostics["formulate_s"].sum()) if diagnostics is not None else 0.0,
        "mpc_solve_s": float(diagnostics["solve_s"].sum()) if diagnostics is not None else 0.0,
    }
    return outcome


def _shares_data(scenario: Scenario, name: str) -> bool:
    return name == BASE_VARIANT or not {"data", "seed"} & set(scenario.doc.variants.get(name, {}))


def run_variants(scenario: Scenario, names: Iterable[str], parallel: bool | None = None) -> dict[str, RunOutcome]:
    """Run the named variants on the same data, in parallel when allowed.

    Variants that patch ``data`` or ``seed`` load their own series.
    """

    names = list(dict.fromkeys(names))
    variants = {name: scenario.with_variant(name) for name in names}
    for variant in variants.values():
        check_scenario(variant)
    shared = load_data(scenario) if scenario.doc.data else {}

    def run_one(name: str) -> RunOutcome:
        variant = variants[name]
        return run_scenario(variant, data=shared if _shares_data(scenario, name) else None)

    if parallel is None:
        parallel = feature_enabled("PARALLEL_DISPATCH")
    if not parallel or len(names) < 2:
        return {name: run_one(name) for name in names}
    with ThreadPoolExecutor(max_workers=len(names)) as executor:
        futures = {name: executor.submit(run_one, name) for name in names}
        return {name: futures[name].result() for name in names}


@dataclass
class Comparison:
    baseline: str
    outcomes: dict[str, RunOutcome]
    deltas: dict[str, dict[str, float]]

    def summary_frame(self) -> pd.DataFrame:
        rows = []
        for name, outcome in self.outcomes.items():
            kpis = outcome.kpis
            if kpis is None:
                continue
            rows.append(
                {
                    "variant": name,
                    "biomass_mwh": kpis.energies_mwh["biomass"],
                    "biomass_share": kpis.biomass_share,
                    "renewable_share": kpis.renewable_share,
                    "total_cost_eur": kpis.total_cost_eur,
                    "co2_t": kpis.co2_t,
                    "biomass_stops": kpis.biomass_stops,
                    "violations": kpis.violation_count,
                }
            )
        return pd.DataFrame(rows)

    def to_dict(self) -> dict[str, Any]:
        return {
            "baseline": self.baseline,
            "variants": {name: outcome.kpis.to_dict() if outcome.kpis else None for name, outcome in self.outcomes.items()},
            "deltas": self.deltas,
        }


def comparison_names(scenario: Scenario, names: Iterable[str] | None = None) -> list[str]:
    names = list(names or scenario.doc.compare or [])
    if not names:
        names = [BASE_VARIANT, *scenario.variant_names()]
    if len(names) < 2:
        raise ScenarioError(["compare: at least two variants are needed"])
    return names


def compare_variants(scenario: Scenario, names: Iterable[str] | None = None, parallel: bool | None = None) -> Comparison:
    """Run the variants and report KPI deltas against the first one."""

    names = comparison_names(scenario, names)
    outcomes = run_variants(scenario, names, parallel)
    baseline = names[0]
    base_kpis = outcomes[baseline].kpis
    deltas = {}
    if base_kpis is not None:
        for name in names[1:]:
            if outcomes[name].kpis is not None:
                deltas[name] = kpi_deltas(base_kpis, outcomes[name].kpis)
    return Comparison(baseline, outcomes, deltas)


def run_convergence(
    scenario: Scenario,
    multipliers: Iterable[int] | None = None,
    probes: Iterable[str] | None = None,
) -> ConvergenceReport:
    """Rerun the scenario with every sequence period scaled by each multiplier."""

    check_scenario(scenario)
    block = scenario.doc.convergence
    multipliers = list(multipliers or (block.multipliers if block else [1, 2, 4, 8]))
    probes = list(probes or (block.probes if block and block.probes else scenario.doc.probes))
    if not probes:
        raise ScenarioError(["convergence: no probe slots given"])
    data = load_data(scenario)

    def build_engine(k: int):
        return build_cosimulation(scenario, multiplier=k, data=data, record=probes).engine

    t_end = scenario.doc.engine.origin + scenario.doc.engine.duration
    reference = block.reference if block and block.reference else None
    return convergence_study(build_engine, multipliers, probes, t_end, reference)


def storage_patch(capacity: float, discharge_hours: float) -> dict[str, Any]:
    return {"plant": {"storage_capacity": float(capacity), "storage_power": float(capacity) / discharge_hours}}


def run_sweep(scenario: Scenario, capacities: Iterable[float] | None = None) -> pd.DataFrame:
    """One run per storage capacity; power follows the minimum discharge time."""

    block = scenario.doc.sweep
    capacities = list(capacities if capacities is not None else (block.capacities if block else [0.0, 1.0, 2.0, 4.0]))
    discharge_hours = block.discharge_hours if block else 2.0
    base = scenario.with_variant(block.variant) if block and block.variant else scenario
    data = load_data(base) if base.doc.data else {}
    rows = []
    for capacity in capacities:
        outcome = run_scenario(base.with_patch(storage_patch(capacity, discharge_hours)), data=data)
        if outcome.kpis is None:
            raise ScenarioError(["sweep: the scenario has no plant module"])
        kpis = outcome.kpis
        rows.append(
            {
                "capacity_mwh": float(capacity),
                "power_mw": float(capacity) / discharge_hours,
                "biomass_mwh": kpis.energies_mwh["biomass"],
                "biomass_share": kpis.biomass_share,
                "renewable_share": kpis.renewable_share,
                "total_cost_eur": kpis.total_cost_eur,
                "co2_t": kpis.co2_t,
                "biomass_stops": kpis.biomass_stops,
                "violations": kpis.violation_count,
            }
        )
        logger.info("sweep capacity %.3g MWh: biomass share %.4f", capacity, kpis.biomass_share)
    return pd.DataFrame(rows)


def resolve_output_dir(scenario: Scenario, out: str | Path | None = None) -> Path:
    """``--out`` first, then the scenario's ``output_dir``, then the app-data default."""

    if out is not None:
        return Path(out).expanduser()
    if scenario.doc.output_dir:
        return scenario.base_dir / scenario.doc.output_dir
    return default_output_dir() / scenario.doc.name
