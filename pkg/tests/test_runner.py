import filecmp
from pathlib import Path

import pytest

from cosimpc.errors import ScenarioError
from cosimpc.reports import write_run_outputs
from cosimpc.runner import (
    compare_variants,
    comparison_names,
    resolve_output_dir,
    run_convergence,
    run_scenario,
    run_sweep,
    run_variants,
    storage_patch,
)
from cosimpc.scenario import load_scenario, scenario_from_dict
from cosimpc.testplants import two_lag_exact
from tests.test_scenario import SCENARIO_DIR, mini_doc, write_scenario


@pytest.fixture
def mini(tmp_path):
    return load_scenario(write_scenario(tmp_path))


def test_run_scenario_summarizes_the_plant(mini):
    outcome = run_scenario(mini)

    assert outcome.results.ticks_run == 12
    assert outcome.kpis.hours == pytest.approx(12.0)
    assert outcome.kpis.energies_mwh["load"] == pytest.approx(sum([4.0, 2.0, 2.0, 6.0, 7.0, 3.0] * 2))
    assert 0.0 < outcome.kpis.biomass_share <= 1.0
    assert outcome.kpis.violation_count == 0
    assert list(outcome.diagnostics["iteration"]) == [0, 1]
    assert outcome.runtime["ticks"] == 12
    assert set(outcome.controllers()) == {"mpc"}
    assert set(outcome.plants()) == {"plant"}


def test_rbc_variant_records_a_logic_trace(mini):
    outcome = run_scenario(mini.with_variant("rbc"))

    assert outcome.diagnostics is None
    assert outcome.kpis is not None
    assert list(outcome.logic_traces()) == ["rbc"]
    with pytest.raises(ScenarioError, match="no mpc module"):
        run_scenario(mini.with_variant("rbc"), require_mpc=True)


def test_rerun_writes_identical_csvs(mini, tmp_path):
    first = write_run_outputs(run_scenario(mini), tmp_path / "first", "run")
    second = write_run_outputs(run_scenario(mini), tmp_path / "second", "run")

    def csv_names(paths, root):
        return sorted(path.relative_to(root).as_posix() for path in paths if path.suffix == ".csv")

    names = csv_names(first, tmp_path / "first")
    assert names == csv_names(second, tmp_path / "second")
    # solver timings differ between runs
    names.remove("mpc_diagnostics.csv")
    assert "kpis.csv" in names and "plant_plant.csv" in names and "probes/plant.Pb.csv" in names
    _, mismatch, errors = filecmp.cmpfiles(tmp_path / "first", tmp_path / "second", names, shallow=False)
    assert mismatch == [] and errors == []


def test_variants_run_in_parallel_with_same_results(mini):
    serial = run_variants(mini, ["base", "no_storage"], parallel=False)
    parallel = run_variants(mini, ["base", "no_storage"], parallel=True)

    for name in serial:
        assert serial[name].kpis.energies_mwh == parallel[name].kpis.energies_mwh
        assert serial[name].kpis.total_cost_eur == parallel[name].kpis.total_cost_eur


def test_compare_reports_deltas_against_the_first_variant(mini):
    comparison = compare_variants(mini, ["no_storage", "base"], parallel=False)

    assert comparison.baseline == "no_storage"
    assert set(comparison.deltas) == {"base"}
    base = comparison.outcomes["base"].kpis
    without = comparison.outcomes["no_storage"].kpis
    delta = comparison.deltas["base"]
    assert delta["biomass_mwh"] == pytest.approx(base.energies_mwh["biomass"] - without.energies_mwh["biomass"])
    assert list(comparison.summary_frame()["variant"]) == ["no_storage", "base"]


def test_comparison_names_default_to_every_variant(mini):
    assert comparison_names(mini) == ["base", "no_storage", "rbc"]
    assert comparison_names(mini, ["rbc", "base"]) == ["rbc", "base"]
    with pytest.raises(ScenarioError, match="at least two"):
        comparison_names(mini, ["base"])


def test_sweep_scales_power_with_capacity(mini):
    frame = run_sweep(mini, capacities=[0.0, 2.0])

    assert list(frame["capacity_mwh"]) == [0.0, 2.0]
    assert list(frame["power_mw"]) == [0.0, 1.0]
    assert (frame["violations"] == 0).all()
    assert storage_patch(4.0, 2.0) == {"plant": {"storage_capacity": 4.0, "storage_power": 2.0}}


def test_coupling_error_shrinks_with_the_coupling_period():
    scenario = load_scenario(SCENARIO_DIR / "two_lag.json")
    exact = two_lag_exact(3200.0, 600.0, 900.0)
    report = run_convergence(scenario)

    assert report.multipliers == [8, 4, 2, 1]
    errors = [abs(value - exact[0]) for value in report.final_values["lag1.x"]]
    assert errors == sorted(errors, reverse=True)
    assert errors[-1] < 2e-2
    assert report.differences["lag1.x"][-1] < report.differences["lag1.x"][0]


def test_convergence_against_a_reference():
    scenario = load_scenario(SCENARIO_DIR / "two_lag.json")
    exact = two_lag_exact(3200.0, 600.0, 900.0)
    patched = scenario.with_patch({"convergence": {"reference": {"lag1.x": float(exact[0]), "lag2.x": float(exact[1])}}})
    report = run_convergence(patched, multipliers=[4, 1])

    assert report.errors["lag2.x"][1] < report.errors["lag2.x"][0]


def test_convergence_needs_probes():
    doc = {
        "engine": {"base_period": 10, "duration": 100},
        "sequences": {"main": {"modules": ["c"]}},
        "modules": {"c": {"type": "constant"}},
    }

    with pytest.raises(ScenarioError, match="no probe slots"):
        run_convergence(scenario_from_dict(doc))


def test_output_dir_precedence(tmp_path, monkeypatch):
    monkeypatch.setenv("COSIMPC_HOME", str(tmp_path / "home"))
    doc = mini_doc()
    scenario = load_scenario(write_scenario(tmp_path, doc))

    assert resolve_output_dir(scenario) == tmp_path / "home" / "output" / "mini_a"
    assert resolve_output_dir(scenario, tmp_path / "explicit") == tmp_path / "explicit"

    doc["output_dir"] = "results"
    scenario = load_scenario(write_scenario(tmp_path, doc))
    assert resolve_output_dir(scenario) == Path(tmp_path) / "results"
