"""Key performance indicators of a simulated plant run."""

from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Mapping

import pandas as pd

from cosimpc.plants import PlantParams

# Published yearly biomass energy of the studied plant without and with a
# 2 MWh storage; reported for context only, the synthetic load differs.
REFERENCE_BIOMASS_MWH = {"without_storage": 12_841.0, "with_storage": 14_464.0}

# wall-clock timings stay out of kpis.csv so reruns give identical files
SOLVER_CSV_KEYS = ("iterations", "nodes_total", "variables_max", "binaries_max", "constraints_max")


@dataclass(frozen=True)
class KpiReport:
    plant: str
    hours: float
    energies_mwh: dict[str, float]
    biomass_share: float
    renewable_share: float
    renewable_target: float
    total_cost_eur: float
    co2_t: float
    biomass_stops: int
    violations: dict[str, int]
    violation_mwh: dict[str, float]
    solver: dict[str, Any] = field(default_factory=dict)
    reference: dict[str, float] = field(default_factory=lambda: dict(REFERENCE_BIOMASS_MWH))

    @property
    def violation_count(self) -> int:
        return sum(self.violations.values())

    @property
    def meets_target(self) -> bool:
        return self.renewable_share >= self.renewable_target

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["violation_count"] = self.violation_count
        data["meets_target"] = self.meets_target
        return data

    def to_frame(self) -> pd.DataFrame:
        """Flat metric/value table for kpis.csv."""

        rows = [
            ("hours", self.hours),
            *((f"energy_{name}_mwh", value) for name, value in self.energies_mwh.items()),
            ("biomass_share", self.biomass_share),
            ("renewable_share", self.renewable_share),
            ("renewable_target", self.renewable_target),
            ("total_cost_eur", self.total_cost_eur),
            ("co2_t", self.co2_t),
            ("biomass_stops", self.biomass_stops),
            ("violation_count", self.violation_count),
            *((f"violation_{name.replace(' ', '_')}_mwh", value) for name, value in self.violation_mwh.items()),
            *((f"solver_{name}", self.solver[name]) for name in SOLVER_CSV_KEYS if name in self.solver),
        ]
        return pd.DataFrame(rows, columns=["metric", "value"])


def solver_statistics(diagnostics: pd.DataFrame | None) -> dict[str, Any]:
    if diagnostics is None or diagnostics.empty:
        return {}
    return {
        "iterations": int(len(diagnostics)),
        "statuses": {str(k): int(v) for k, v in diagnostics["status"].value_counts().sort_index().items()},
        "nodes_total": int(diagnostics["nodes"].sum()),
        "solve_s_total": float(diagnostics["solve_s"].sum()),
        "solve_s_max": float(diagnostics["solve_s"].max()),
        "formulate_s_total": float(diagnostics["formulate_s"].sum()),
        "variables_max": int(diagnostics["variables"].max()),
        "binaries_max": int(diagnostics["binaries"].max()),
        "constraints_max": int(diagnostics["constraints"].max()),
    }


def compute_kpis(
    frame: pd.DataFrame,
    params: PlantParams,
    violations: Iterable[Mapping[str, Any]] = (),
    diagnostics: pd.DataFrame | None = None,
) -> KpiReport:
    """Summarize a plant module's step frame.

    Biomass share is biomass heat over produced heat. For plant B the ambient
    part of the heat pump output (1 - 1/COP) also counts as renewable.
    """

    if frame.empty:
        raise ValueError("Cannot compute KPIs of an empty run.")
    dt_h = frame["dt_h"]
    backup = "Pg" if params.kind == "A" else "Php"
    energy = {
        "biomass": float((frame["Pb"] * dt_h).sum()),
        "gas" if backup == "Pg" else "heat_pump": float((frame[backup] * dt_h).sum()),
        "charge": float((frame["Pch"] * dt_h).sum()),
        "discharge": float((frame["Pdis"] * dt_h).sum()),
        "load": float((frame["load"] * dt_h).sum()),
    }
    backup_mwh = float((frame[backup] * dt_h).sum())
    produced = energy["biomass"] + backup_mwh
    biomass_share = energy["biomass"] / produced if produced > 0 else 0.0
    renewable = energy["biomass"]
    if params.kind == "B":
        renewable += backup_mwh * (1.0 - 1.0 / params.cop)
    renewable_share = renewable / produced if produced > 0 else 0.0

    counts: Counter[str] = Counter()
    amounts: dict[str, float] = {}
    for violation in violations:
        counts[violation["kind"]] += 1
        amounts[violation["kind"]] = amounts.get(violation["kind"], 0.0) + float(violation["amount_mwh"])
    return KpiReport(
        plant=params.kind,
        hours=float(dt_h.sum()),
        energies_mwh=energy,
        biomass_share=biomass_share,
        renewable_share=renewable_share,
        renewable_target=params.renewable_target,
        total_cost_eur=float(frame["cost"].sum()),
        co2_t=float(frame["co2"].sum()),
        biomass_stops=int(frame["stop"].sum()),
        violations=dict(sorted(counts.items())),
        violation_mwh=dict(sorted(amounts.items())),
        solver=solver_statistics(diagnostics),
    )


def kpi_deltas(base: KpiReport, other: KpiReport) -> dict[str, float]:
    """``other`` minus ``base`` for the headline indicators."""

    cost_change = (other.total_cost_eur - base.total_cost_eur) / base.total_cost_eur if base.total_cost_eur else 0.0
    return {
        "biomass_mwh": other.energies_mwh["biomass"] - base.energies_mwh["biomass"],
        "biomass_share": other.biomass_share - base.biomass_share,
        "biomass_increase_rel": (
            other.energies_mwh["biomass"] / base.energies_mwh["biomass"] - 1.0 if base.energies_mwh["biomass"] else 0.0
        ),
        "renewable_share": other.renewable_share - base.renewable_share,
        "total_cost_eur": other.total_cost_eur - base.total_cost_eur,
        "total_cost_rel": cost_change,
        "co2_t": other.co2_t - base.co2_t,
        "violation_count": other.violation_count - base.violation_count,
    }
