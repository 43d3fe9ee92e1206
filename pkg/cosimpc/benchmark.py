"""Formulation and solve timings for reference problem sizes."""

from __future__ import annotations

import logging
import time
from typing import Any, Mapping

import numpy as np
import pandas as pd

from cosimpc.branch_bound import MilpOptions, solve_milp
from cosimpc.formulations import PLANT_STATE, formulate_scenario_a, formulate_scenario_b
from cosimpc.loads import generate_price_series, generate_synthetic_load
from cosimpc.milp import CONTINUOUS, LE, MilpProblem
from cosimpc.plants import PlantParamsA, PlantParamsB

logger = logging.getLogger(__name__)

# published size of one 96-step plant-B window
SCENARIO_B_REFERENCE = {"continuous": 700, "binary": 360, "constraints": 2400}


def build_chain_problem(n_vars: int = 10_000) -> MilpProblem:
    """``n_vars`` bounded variables and ``n_vars`` two-term rows, ``2 * n_vars`` nonzeros."""

    problem = MilpProblem("chain")
    variables = [problem.add_var(f"x{i}", CONTINUOUS, 0, 1) for i in range(n_vars)]
    for i in range(n_vars):
        problem.add_constraint({variables[i]: 1.0, variables[(i + 1) % n_vars]: 1.0}, LE, 1.5)
    return problem


def _row(case: str, problem: MilpProblem, formulate_s: float, solution=None, solve_s: float | None = None, **extra) -> dict:
    size = problem.size_summary()
    return {
        "case": case,
        "variables": size["variables"],
        "continuous": size["continuous"],
        "binary": size["binary"],
        "constraints": size["constraints"],
        "nonzeros": size["nonzeros"],
        "formulate_s": formulate_s,
        "solve_s": solve_s,
        "status": solution.status if solution is not None else None,
        "objective": solution.objective if solution is not None and solution.has_incumbent else None,
        "nodes": solution.nodes if solution is not None else None,
        **extra,
    }


def _timed(fn, *args, **kwargs):
    started = time.perf_counter()
    result = fn(*args, **kwargs)
    return result, time.perf_counter() - started


def run_benchmark(solve: bool = True, solver: Mapping[str, Any] | None = None, n_vars: int = 10_000) -> pd.DataFrame:
    """Time the large-model build and one daily window of each plant.

    With ``solve`` the plant windows are also solved under ``solver`` options.
    """

    options = MilpOptions.from_mapping({"time_limit": 60.0, **(solver or {})})
    rows = []

    timings = []
    for _ in range(3):
        problem, elapsed = _timed(build_chain_problem, n_vars)
        timings.append(elapsed)
    rows.append(_row(f"formulation_{n_vars}", problem, min(timings)))

    load_a = generate_synthetic_load({"hours": 48})
    window_a, formulate_a = _timed(formulate_scenario_a, PLANT_STATE, load_a.values, PlantParamsA(), 1.0)
    solution = solve_s = None
    if solve:
        solution, solve_s = _timed(solve_milp, window_a.problem, options)
    rows.append(_row("scenario_a_48h_hourly", window_a.problem, formulate_a, solution, solve_s))

    params_b = PlantParamsB()
    load_b = generate_synthetic_load(
        {"hours": 24, "step_s": 900, "annual_mwh": params_b.annual_load_mwh, "max_peak_mw": params_b.servable_peak}
    )
    price = generate_price_series({"hours": 24})
    window_b, formulate_b = _timed(
        formulate_scenario_b, PLANT_STATE, np.asarray(load_b.values), np.asarray(price.values), params_b, 0.25
    )
    solution = solve_s = None
    if solve:
        solution, solve_s = _timed(solve_milp, window_b.problem, options)
    size = window_b.problem.size_summary()
    ratios = {f"{key}_ratio": size[key] / value for key, value in SCENARIO_B_REFERENCE.items()}
    rows.append(_row("scenario_b_96_quarter_hours", window_b.problem, formulate_b, solution, solve_s, **ratios))

    for row in rows:
        logger.info("benchmark %s: %d variables, formulate %.4f s", row["case"], row["variables"], row["formulate_s"])
    return pd.DataFrame(rows)
