import importlib

import pytest

from cosimpc import config, history


def test_app_data_path_defaults_to_home_cosimpc(monkeypatch):
    monkeypatch.delenv("COSIMPC_HOME", raising=False)

    path = config.app_data_path("history.sqlite3")

    assert path.name == "history.sqlite3"
    assert path.parent.name == ".cosimpc"


def test_app_data_path_honors_cosimpc_home(monkeypatch, tmp_path):
    monkeypatch.setenv("COSIMPC_HOME", str(tmp_path))

    assert config.app_data_path("nested", "file.json") == tmp_path / "nested" / "file.json"
    assert history.default_history_db() == tmp_path / "history.sqlite3"
    assert config.default_output_dir() == tmp_path / "output"


def test_feature_flags_are_disabled_from_the_environment(monkeypatch):
    monkeypatch.setenv("COSIMPC_DISABLE_RUN_HISTORY", "yes")
    monkeypatch.setenv("COSIMPC_DISABLE_LP_DUMP", "0")

    assert not config.feature_enabled("RUN_HISTORY")
    assert config.feature_enabled("LP_DUMP")
    assert config.feature_enabled("SOMETHING_ELSE")
    assert not config.feature_enabled("SOMETHING_ELSE", default=False)


@pytest.mark.parametrize(("raw", "enabled"), [("1", False), ("TRUE", False), (" on ", False), ("yes", False), ("off", True), ("", True)])
def test_feature_flag_spellings(monkeypatch, raw, enabled):
    monkeypatch.setenv("COSIMPC_DISABLE_LP_DUMP", raw)

    assert config.feature_enabled("lp_dump") is enabled


def test_module_flags_read_on_import(monkeypatch):
    monkeypatch.setenv("COSIMPC_DISABLE_PARALLEL_DISPATCH", "1")
    try:
        reloaded = importlib.reload(config)
        assert reloaded.PARALLEL_DISPATCH is False
        assert reloaded.LP_DUMP is True
    finally:
        monkeypatch.delenv("COSIMPC_DISABLE_PARALLEL_DISPATCH")
        importlib.reload(config)


def test_solver_defaults_from_environment(monkeypatch):
    monkeypatch.setenv("COSIMPC_GAP_TOL", "1e-4")
    monkeypatch.setenv("COSIMPC_NODE_LIMIT", "500")
    monkeypatch.setenv("COSIMPC_TIME_LIMIT", "not-a-number")

    defaults = config.solver_defaults()

    assert defaults["gap_tol"] == 1e-4
    assert defaults["node_limit"] == 500
    assert defaults["time_limit"] == config.SOLVER_DEFAULTS["time_limit"]
    assert defaults["rel_gap_tol"] == 0.0
