"""Window MILPs for the district-heating plants.

Both plants share the biomass commitment block (on/off binary, min and max
power, stop or start indicators with a timing rule) and the storage block
(lossless energy box with charge/discharge mode binaries). Plant A adds a gas
boiler, plant B a heat pump priced by the electricity forecast. The terminal
storage energy is credited at the biomass price.
"""

from __future__ import annotations

import logging
from typing import Any, Mapping, Sequence

import numpy as np

from cosimpc.milp import BINARY, CONTINUOUS, LinExpr, MilpProblem, Var, lin_sum
from cosimpc.mpc import ForecastSet, Formulation, Horizon, register_formulator
from cosimpc.plants import LONG_AGO_H, MIN_UP_TIME, PlantParamsA, PlantParamsB

logger = logging.getLogger(__name__)

PLANT_STATE = {"E": 0.0, "u": 0.0, "since_stop": LONG_AGO_H, "since_start": LONG_AGO_H}


def _steps(hours: float, dt_h: float) -> int:
    return int(round(hours / dt_h))


def add_commitment(
    problem: MilpProblem,
    params,
    state: Mapping[str, float],
    n_steps: int,
    dt_h: float,
) -> tuple[list[Var], list[Var], list[Var]]:
    """Biomass power, on/off binaries and switch indicators for ``n_steps`` steps.

    With the stop-spacing rule ``s(t)`` marks a stop and every window of
    ``stop_spacing_h`` holds at most one. With the min-up-time rule ``s(t)``
    marks a start and the unit stays on for the window after it.
    """

    window = _steps(params.stop_spacing_h, dt_h)
    u0 = 1.0 if state.get("u", 0.0) >= 0.5 else 0.0
    since_stop = _steps(state.get("since_stop", LONG_AGO_H), dt_h)
    since_start = _steps(state.get("since_start", LONG_AGO_H), dt_h)
    min_up = params.stop_rule == MIN_UP_TIME

    locked_on = window - since_start if (min_up and u0 and since_start < window) else 0
    no_stop = window - since_stop if (not min_up and since_stop < window) else 0

    pb, u, s = [], [], []
    for t in range(n_steps):
        u.append(problem.add_var(f"u_{t}", BINARY, 1.0 if t < locked_on else 0.0, 1.0))
        s.append(problem.add_var(f"s_{t}", BINARY, 0.0, 0.0 if t < no_stop else 1.0))
        pb.append(problem.add_var(f"Pb_{t}", CONTINUOUS, 0.0, params.biomass_max))
    for t in range(n_steps):
        problem.add(pb[t] <= params.biomass_max * u[t], name=f"pb_max_{t}")
        problem.add(pb[t] >= params.biomass_min * u[t], name=f"pb_min_{t}")
        previous = u[t - 1] if t else u0
        if min_up:
            problem.add(s[t] >= u[t] - previous, name=f"start_{t}")
        else:
            problem.add(s[t] >= previous - u[t], name=f"stop_{t}")
    if window >= 2:
        if min_up:
            for t in range(n_steps):
                stop = min(t + window, n_steps)
                problem.add(lin_sum(u[t:stop]) >= (stop - t) * s[t], name=f"min_up_{t}")
        else:
            for t in range(max(n_steps - window + 1, 1)):
                problem.add(lin_sum(s[t : t + window]) <= 1, name=f"stop_window_{t}")
    return pb, u, s


def add_storage(
    problem: MilpProblem,
    params,
    state: Mapping[str, float],
    n_steps: int,
    dt_h: float,
) -> tuple[list, list, list]:
    """Charge, discharge and energy variables; zeros when the plant has no storage."""

    if params.storage_capacity <= 0 or params.storage_power <= 0:
        zeros = [0.0] * n_steps
        return zeros, zeros, [0.0] * (n_steps + 1)
    e0 = min(max(float(state.get("E", 0.0)), 0.0), params.storage_capacity)
    energy = [problem.add_var("E_0", CONTINUOUS, e0, e0)]
    charge, discharge = [], []
    for t in range(n_steps):
        charge.append(problem.add_var(f"Pch_{t}", CONTINUOUS, 0.0, params.storage_power))
        discharge.append(problem.add_var(f"Pdis_{t}", CONTINUOUS, 0.0, params.storage_power))
        mode = problem.add_var(f"m_{t}", BINARY)
        energy.append(problem.add_var(f"E_{t + 1}", CONTINUOUS, 0.0, params.storage_capacity))
        problem.add(energy[t + 1] == energy[t] + dt_h * charge[t] - dt_h * discharge[t], name=f"energy_{t}")
        problem.add(charge[t] <= params.storage_power * mode, name=f"charge_mode_{t}")
        problem.add(discharge[t] <= params.storage_power * (1 - mode), name=f"discharge_mode_{t}")
    return charge, discharge, energy


def _add_min_share(problem: MilpProblem, params, pb: list[Var], load: np.ndarray) -> None:
    if params.min_window_share is not None:
        problem.add(lin_sum(pb) >= params.min_window_share * float(load.sum()), name="min_share")


def formulate_scenario_a(
    state: Mapping[str, float],
    load: Sequence[float],
    params: PlantParamsA | Mapping[str, Any],
    dt_h: float = 1.0,
) -> Formulation:
    """Gas boiler + biomass boiler + storage window of ``len(load)`` steps."""

    if not isinstance(params, PlantParamsA):
        params = PlantParamsA.from_mapping(params)
    load = np.asarray(load, dtype=float)
    n_steps = len(load)
    problem = MilpProblem("district_heating_a")
    pb, u, s = add_commitment(problem, params, state, n_steps, dt_h)
    charge, discharge, energy = add_storage(problem, params, state, n_steps, dt_h)
    pg = [problem.add_var(f"Pg_{t}", CONTINUOUS, 0.0, params.gas_max) for t in range(n_steps)]
    for t in range(n_steps):
        problem.add_constraint(pg[t] + pb[t] + discharge[t] - charge[t], "=", float(load[t]), name=f"balance_{t}")
    _add_min_share(problem, params, pb, load)

    gas_rate = params.gas_price + params.carbon_price * params.gas_co2
    biomass_rate = params.biomass_price + params.carbon_price * params.biomass_co2
    cost = LinExpr()
    for t in range(n_steps):
        cost += dt_h * gas_rate * pg[t] + dt_h * biomass_rate * pb[t]
    cost -= biomass_rate * energy[-1]
    problem.set_objective(cost)
    return Formulation(
        problem,
        {"u": u, "Pb": pb, "Pch": charge, "Pdis": discharge, "Pg": pg},
        {"stops": s, "energy": energy, "size": problem.size_summary()},
    )


def formulate_scenario_b(
    state: Mapping[str, float],
    load: Sequence[float],
    price_el: Sequence[float],
    params: PlantParamsB | Mapping[str, Any],
    dt_h: float = 0.25,
) -> Formulation:
    """Biomass boiler + heat pump + storage window; heat pump heat costs price_el / COP."""

    if not isinstance(params, PlantParamsB):
        params = PlantParamsB.from_mapping(params)
    load = np.asarray(load, dtype=float)
    price_el = np.asarray(price_el, dtype=float)
    if price_el.shape != load.shape:
        raise ValueError("Load and electricity price forecasts must have the same length.")
    n_steps = len(load)
    problem = MilpProblem("district_heating_b")
    pb, u, s = add_commitment(problem, params, state, n_steps, dt_h)
    charge, discharge, energy = add_storage(problem, params, state, n_steps, dt_h)
    php, on = [], []
    for t in range(n_steps):
        php.append(problem.add_var(f"Php_{t}", CONTINUOUS, 0.0, params.hp_max))
        on.append(problem.add_var(f"v_{t}", BINARY))
        problem.add(php[t] <= params.hp_max * on[t], name=f"hp_max_{t}")
        problem.add(php[t] >= params.hp_min * on[t], name=f"hp_min_{t}")
        problem.add_constraint(php[t] + pb[t] + discharge[t] - charge[t], "=", float(load[t]), name=f"balance_{t}")
    _add_min_share(problem, params, pb, load)

    biomass_rate = params.biomass_price + params.carbon_price * params.biomass_co2
    cost = LinExpr()
    for t in range(n_steps):
        hp_rate = (price_el[t] + params.carbon_price * params.electricity_co2) / params.cop
        cost += dt_h * biomass_rate * pb[t] + dt_h * hp_rate * php[t]
    cost -= biomass_rate * energy[-1]
    problem.set_objective(cost)
    return Formulation(
        problem,
        {"u": u, "Pb": pb, "Pch": charge, "Pdis": discharge, "Php": php},
        {"stops": s, "energy": energy, "heat_pump_on": on, "size": problem.size_summary()},
    )


@register_formulator("district_heating_a", forecasts=("load",), state=PLANT_STATE, controls=("u", "Pb", "Pch", "Pdis", "Pg"))
def district_heating_a(state, forecasts: ForecastSet, t_now: int, horizon: Horizon, params) -> Formulation:
    load = forecasts.values("load", t_now, horizon)
    return formulate_scenario_a(state, load, params, horizon.step_hours)


@register_formulator(
    "district_heating_b",
    forecasts=("load", "price_el"),
    state=PLANT_STATE,
    controls=("u", "Pb", "Pch", "Pdis", "Php"),
)
def district_heating_b(state, forecasts: ForecastSet, t_now: int, horizon: Horizon, params) -> Formulation:
    load = forecasts.values("load", t_now, horizon)
    price_el = forecasts.values("price_el", t_now, horizon)
    return formulate_scenario_b(state, load, price_el, params, horizon.step_hours)


def stop_windows_ok(u_history: Sequence[float], window: int) -> bool:
    """True when every ``window`` consecutive steps of ``u_history`` hold at most one stop."""

    u_history = np.asarray(u_history) >= 0.5
    stops = np.flatnonzero(u_history[:-1] & ~u_history[1:]) + 1
    return bool(np.all(np.diff(stops) >= window)) if len(stops) > 1 else True
