from __future__ import annotations

import os
from pathlib import Path

DEFAULT_SEED = 20240501

SOLVER_DEFAULTS = {
    "gap_tol": 1e-6,
    "rel_gap_tol": 0.0,
    "node_limit": 100_000,
    "time_limit": 60.0,
}


def app_data_dir() -> Path:
    """Home of run outputs: ``$COSIMPC_HOME`` when set, otherwise ``~/.cosimpc``."""

    return Path(os.environ.get("COSIMPC_HOME", Path.home() / ".cosimpc")).expanduser()


def app_data_path(*parts: str) -> Path:
    """``parts`` joined under the cosimpc home."""

    return app_data_dir().joinpath(*parts)


def default_output_dir() -> Path:
    return app_data_path("output")


def feature_enabled(feature_name: str, default: bool = True) -> bool:
    """Switch for an optional behaviour such as ``PARALLEL_DISPATCH`` or ``LP_DUMP``.

    Setting ``COSIMPC_DISABLE_<NAME>`` to 1, true, yes or on turns it off;
    otherwise ``default`` applies.
    """

    value = os.environ.get(f"COSIMPC_DISABLE_{feature_name.upper()}")
    if value is None:
        return default
    return value.strip().lower() not in {"1", "true", "yes", "on"}


def _env_number(name: str, cast, default):
    raw = os.environ.get(name)
    if raw is None or not raw.strip():
        return default
    try:
        return cast(raw)
    except ValueError:
        return default


def solver_defaults() -> dict:
    """Return solver options from built-in defaults overridden by the environment."""

    return {
        "gap_tol": _env_number("COSIMPC_GAP_TOL", float, SOLVER_DEFAULTS["gap_tol"]),
        "rel_gap_tol": _env_number("COSIMPC_REL_GAP_TOL", float, SOLVER_DEFAULTS["rel_gap_tol"]),
        "node_limit": _env_number("COSIMPC_NODE_LIMIT", int, SOLVER_DEFAULTS["node_limit"]),
        "time_limit": _env_number("COSIMPC_TIME_LIMIT", float, SOLVER_DEFAULTS["time_limit"]),
    }


PARALLEL_DISPATCH = feature_enabled("PARALLEL_DISPATCH")
LP_DUMP = feature_enabled("LP_DUMP")
