import pandas as pd
import pytest

from cosimpc.kpis import REFERENCE_BIOMASS_MWH, compute_kpis, kpi_deltas
from cosimpc.plants import PlantParamsA, PlantParamsB


def plant_frame(pb, backup, name="Pg", dt_h=1.0, **extra):
    n = len(pb)
    data = {
        "time": [int(i * dt_h * 3600) for i in range(n)],
        "dt_h": [dt_h] * n,
        "Pb": pb,
        name: backup,
        "Pch": [0.0] * n,
        "Pdis": [0.0] * n,
        "load": [a + b for a, b in zip(pb, backup)],
        "stop": [0.0] * n,
        "cost": [dt_h * (30.0 * a + 35.0 * b) for a, b in zip(pb, backup)],
        "co2": [dt_h * 0.227 * b for b in backup],
    }
    data.update(extra)
    return pd.DataFrame(data)


def test_biomass_share_is_biomass_over_total():
    report = compute_kpis(plant_frame([3.0, 3.0, 0.0, 0.0], [1.0, 1.0, 2.0, 2.0]), PlantParamsA())

    assert report.energies_mwh["biomass"] == pytest.approx(6.0)
    assert report.energies_mwh["gas"] == pytest.approx(6.0)
    assert report.biomass_share == pytest.approx(0.5)
    assert report.renewable_share == pytest.approx(0.5)
    assert not report.meets_target
    assert report.total_cost_eur == pytest.approx(6 * 30.0 + 6 * 35.0)
    assert report.co2_t == pytest.approx(6 * 0.227)


def test_zero_violation_run_reports_zero():
    report = compute_kpis(plant_frame([3.0], [1.0]), PlantParamsA())

    assert report.violation_count == 0
    assert report.violations == {}
    assert report.to_dict()["violation_count"] == 0


def test_violations_are_counted_by_kind():
    violations = [
        {"kind": "unmet load", "amount_mwh": 0.5, "time": 0},
        {"kind": "unmet load", "amount_mwh": 0.25, "time": 3600},
        {"kind": "storage overflow", "amount_mwh": 1.0, "time": 7200},
    ]
    report = compute_kpis(plant_frame([3.0] * 3, [1.0] * 3), PlantParamsA(), violations)

    assert report.violations == {"storage overflow": 1, "unmet load": 2}
    assert report.violation_mwh["unmet load"] == pytest.approx(0.75)
    assert report.violation_count == 3
    frame = report.to_frame()
    assert frame.set_index("metric").loc["violation_unmet_load_mwh", "value"] == pytest.approx(0.75)


def test_heat_pump_ambient_heat_counts_as_renewable():
    frame = plant_frame([1.0, 1.0], [1.5, 1.5], name="Php", dt_h=0.25)
    report = compute_kpis(frame, PlantParamsB(cop=3.0))

    assert report.energies_mwh["heat_pump"] == pytest.approx(0.75)
    assert report.biomass_share == pytest.approx(0.4)
    assert report.renewable_share == pytest.approx((0.5 + 0.75 * 2.0 / 3.0) / 1.25)
    assert report.hours == pytest.approx(0.5)


def test_solver_statistics_and_reference_values():
    diagnostics = pd.DataFrame(
        {
            "status": ["optimal", "optimal", "gap-limit"],
            "nodes": [3, 5, 100],
            "solve_s": [0.1, 0.2, 1.5],
            "formulate_s": [0.01, 0.01, 0.02],
            "variables": [200, 200, 200],
            "binaries": [96, 96, 96],
            "constraints": [300, 300, 300],
        }
    )
    report = compute_kpis(plant_frame([3.0], [1.0]), PlantParamsA(), diagnostics=diagnostics)

    assert report.solver["iterations"] == 3
    assert report.solver["statuses"] == {"gap-limit": 1, "optimal": 2}
    assert report.solver["nodes_total"] == 108
    assert report.solver["solve_s_max"] == pytest.approx(1.5)
    assert report.reference == {"without_storage": 12_841.0, "with_storage": 14_464.0}
    assert REFERENCE_BIOMASS_MWH["with_storage"] > REFERENCE_BIOMASS_MWH["without_storage"]


def test_deltas_between_runs():
    base = compute_kpis(plant_frame([2.0, 2.0], [2.0, 2.0]), PlantParamsA())
    better = compute_kpis(plant_frame([3.0, 3.0], [1.0, 1.0]), PlantParamsA())
    deltas = kpi_deltas(base, better)

    assert deltas["biomass_mwh"] == pytest.approx(2.0)
    assert deltas["biomass_share"] == pytest.approx(0.25)
    assert deltas["biomass_increase_rel"] == pytest.approx(0.5)
    assert deltas["total_cost_eur"] == pytest.approx(-10.0)


def test_empty_frame_is_rejected():
    with pytest.raises(ValueError, match="empty run"):
        compute_kpis(pd.DataFrame(), PlantParamsA())
