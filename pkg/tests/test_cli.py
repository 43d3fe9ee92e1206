import json

import pytest

from cosimpc import history
from cosimpc.core import EXIT_INFEASIBLE, EXIT_INVALID, EXIT_OK, EXIT_RUNTIME, build_parser, error_payload, exit_code_for, main
from cosimpc.errors import AlgebraicLoop, InfeasibleWindow, ModuleStepFailure, ParseError, ScenarioError, UnknownSlot
from tests.test_scenario import mini_doc, write_scenario


@pytest.fixture(autouse=True)
def isolated_home(tmp_path, monkeypatch):
    home = tmp_path / "home"
    monkeypatch.setenv("COSIMPC_HOME", str(home))
    return home


def stderr_payload(captured):
    return json.loads(captured.err.strip().splitlines()[-1])


def test_validate_accepts_a_good_scenario(tmp_path, capsys):
    code = main(["validate", str(write_scenario(tmp_path))])

    assert code == EXIT_OK
    assert "✅ Scenario mini_a is valid (3 modules, 2 variants)" in capsys.readouterr().out


def test_validate_rejects_a_missing_slot(tmp_path, capsys):
    doc = mini_doc()
    doc["modules"]["plant"]["wiring"]["load"] = "load.z"

    code = main(["validate", str(write_scenario(tmp_path, doc))])
    payload = stderr_payload(capsys.readouterr())

    assert code == EXIT_INVALID
    assert payload["error"] == "ScenarioError"
    assert "modules.plant.wiring.load: slot 'load.z' does not exist" in payload["errors"]


def test_validate_checks_every_variant(tmp_path, capsys):
    doc = mini_doc()
    doc["variants"]["rbc"]["modules"]["rbc"]["wiring"]["E"] = "plant.nothing"

    code = main(["validate", str(write_scenario(tmp_path, doc))])
    payload = stderr_payload(capsys.readouterr())

    assert code == EXIT_INVALID
    assert payload["errors"] == ["variants.rbc: modules.rbc.wiring.E: slot 'plant.nothing' does not exist"]


def test_run_writes_reports_and_history(tmp_path, capsys, isolated_home):
    path = write_scenario(tmp_path)
    out = tmp_path / "out"

    code = main(["run", str(path), "--out", str(out)])
    captured = capsys.readouterr()

    assert code == EXIT_OK
    assert "💾" in captured.out
    report = json.loads((out / "run_report.json").read_text())
    assert report["schema"] == "cosimpc.report.v1"
    assert report["command"] == "run"
    assert len(report["scenario"]["sha256"]) == 64
    assert len(report["solver"]["iterations"]) == 2
    assert (out / "plant_plant.csv").is_file()
    assert (out / "probes" / "plant.E.csv").is_file()

    runs = history.list_runs(db_path=isolated_home / "history.sqlite3")
    assert [run["command"] for run in runs] == ["run"]
    assert runs[0]["status"] == "ok"
    assert runs[0]["scenario_hash"] == report["scenario"]["sha256"]
    assert 0.0 <= runs[0]["kpis"]["biomass_share"] <= 1.0


def test_run_variant_defaults_to_the_app_data_output(tmp_path, isolated_home):
    code = main(["run", str(write_scenario(tmp_path)), "--variant", "rbc"])

    assert code == EXIT_OK
    assert (isolated_home / "output" / "mini_a" / "logic_trace_rbc.csv").is_file()


def test_mpc_command_needs_an_mpc_module(tmp_path, capsys):
    code = main(["mpc", str(write_scenario(tmp_path)), "--variant", "rbc"])

    assert code == EXIT_INVALID
    assert "no mpc module" in capsys.readouterr().out


def test_infeasible_window_exits_with_four(tmp_path, capsys, isolated_home):
    doc = mini_doc()
    doc["plant"] = {"min_window_share": 1.0}

    code = main(["mpc", str(write_scenario(tmp_path, doc)), "--out", str(tmp_path / "out")])
    payload = stderr_payload(capsys.readouterr())

    assert code == EXIT_INFEASIBLE
    assert payload["error"] == "ModuleStepFailure"
    assert payload["module"] == "mpc"
    assert payload["cause"] == "InfeasibleWindow"
    assert payload["status"] == "infeasible"
    assert payload["lp_path"].endswith(".lp")
    assert history.list_runs(db_path=isolated_home / "history.sqlite3")[0]["status"] == "infeasible"


def test_history_can_be_disabled(tmp_path, monkeypatch, isolated_home):
    monkeypatch.setenv("COSIMPC_DISABLE_RUN_HISTORY", "1")

    assert main(["run", str(write_scenario(tmp_path)), "--variant", "rbc"]) == EXIT_OK
    assert not (isolated_home / "history.sqlite3").exists()


def test_history_command_lists_recorded_runs(tmp_path, capsys):
    main(["run", str(write_scenario(tmp_path)), "--variant", "rbc", "--out", str(tmp_path / "out")])
    capsys.readouterr()

    assert main(["history", "--limit", "5"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "run" in out and "ok" in out and "scenario.json" in out


def test_history_command_without_runs(capsys):
    assert main(["history"]) == EXIT_OK
    assert "No runs recorded yet." in capsys.readouterr().out


def test_sweep_writes_a_table(tmp_path):
    out = tmp_path / "out"

    assert main(["sweep", str(write_scenario(tmp_path)), "--capacities", "0,2", "--out", str(out)]) == EXIT_OK
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("capacity_mwh,power_mw,biomass_mwh")
    assert len(lines) == 3


def test_compare_writes_one_directory_per_variant(tmp_path):
    out = tmp_path / "out"

    assert main(["compare", str(write_scenario(tmp_path)), "--variants", "rbc,base", "--out", str(out)]) == EXIT_OK
    document = json.loads((out / "comparison.json").read_text())
    assert document["baseline"] == "rbc"
    assert set(document["deltas"]) == {"base"}
    assert (out / "rbc" / "run_report.json").is_file()
    assert (out / "base" / "mpc_diagnostics.csv").is_file()


def test_benchmark_without_solves(tmp_path):
    out = tmp_path / "bench"

    assert main(["benchmark", "--no-solve", "--out", str(out)]) == EXIT_OK
    assert "formulation_10000" in (out / "benchmark.csv").read_text()


def test_unknown_variant_is_invalid(tmp_path, capsys):
    assert main(["run", str(write_scenario(tmp_path)), "--variant", "nope"]) == EXIT_INVALID
    assert "unknown variant" in capsys.readouterr().out


def test_parser_reads_lists():
    args = build_parser().parse_args(["convergence", "s.json", "--multipliers", "1,2,4", "--gap", "0.01"])

    assert args.multipliers == [1, 2, 4]
    assert args.gap == 0.01


@pytest.mark.parametrize(
    "error, code",
    [
        (ScenarioError(["bad"]), EXIT_INVALID),
        (ParseError("unexpected token", 3), EXIT_INVALID),
        (ModuleStepFailure(5, "logic", AlgebraicLoop(["a", "b"])), EXIT_INVALID),
        (ModuleStepFailure(5, "mpc", InfeasibleWindow("infeasible")), EXIT_INFEASIBLE),
        (InfeasibleWindow("infeasible"), EXIT_INFEASIBLE),
        (ModuleStepFailure(5, "plant", UnknownSlot("x.y")), EXIT_RUNTIME),
        (ValueError("boom"), EXIT_RUNTIME),
    ],
)
def test_exit_codes(error, code):
    assert exit_code_for(error) == code


def test_error_payload_carries_the_lp_path():
    payload = error_payload(ModuleStepFailure(24, "mpc", InfeasibleWindow("infeasible", "/tmp/window.lp")))

    assert payload["tick"] == 24
    assert payload["lp_path"] == "/tmp/window.lp"
    assert payload["errors"] == [str(ModuleStepFailure(24, "mpc", InfeasibleWindow("infeasible", "/tmp/window.lp")))]
