import math

import pytest

from cosimpc.branch_bound import solve_milp
from cosimpc.engine import CoSimulation, Sequence
from cosimpc.errors import ForecastGap, InfeasibleWindow, InvalidHorizon, ModuleStepFailure
from cosimpc.formulations import formulate_scenario_a
from cosimpc.milp import CONTINUOUS, MilpProblem
from cosimpc.mpc import (
    ForecastFeed,
    ForecastSet,
    Formulation,
    Horizon,
    MpcModule,
    get_formulator,
    mpc_iterate,
    receding_update,
    register_formulator,
)
from cosimpc.plants import PlantModuleA
from cosimpc.testplants import SeriesSource
from cosimpc.timebase import TimeVector

HOUR = 3600


@register_formulator("single_boiler", forecasts=("load",), state={}, controls=("P",))
def single_boiler(state, forecasts, t_now, horizon, params):
    problem = MilpProblem("single_boiler")
    load = forecasts.values("load", t_now, horizon)
    power = []
    for t, value in enumerate(load):
        power.append(problem.add_var(f"P_{t}", CONTINUOUS, 0.0, params.get("cap", 100.0)))
        problem.add(power[t] == float(value), name=f"balance_{t}")
    problem.set_objective(sum(params.get("cost", 20.0) * var for var in power))
    return Formulation(problem, {"P": power})


def hourly(values, start=0):
    return TimeVector.regular(start, HOUR, values)


def test_horizon_validation():
    horizon = Horizon.hours(24, 48, 1)

    assert horizon.n_steps == 48
    assert horizon.n_applied == 24
    assert horizon.step_times(HOUR)[:2] == [HOUR, 2 * HOUR]
    with pytest.raises(InvalidHorizon, match="multiples"):
        Horizon(5400, 48 * HOUR, HOUR)
    with pytest.raises(InvalidHorizon, match="exceed"):
        Horizon.hours(72, 48, 1)
    with pytest.raises(InvalidHorizon, match="positive"):
        Horizon(0, HOUR, HOUR)


def test_daily_iterations_per_year():
    horizon = Horizon.hours(24, 48, 1)

    assert 365 * 24 * HOUR // horizon.control_period == 365


def test_single_boiler_trajectory_follows_the_load():
    load = hourly([3.0, 5.0, 4.0, 1.0, 2.0, 6.0])
    horizon = Horizon.hours(2, 4, 1)
    forecasts = ForecastFeed({"load": load}).initial(0, horizon)

    iteration = mpc_iterate(0, {}, forecasts, "single_boiler", horizon)

    assert iteration.trajectory.planned["P"] == pytest.approx((3.0, 5.0, 4.0, 1.0))
    assert iteration.trajectory.applied("P").values == pytest.approx((3.0, 5.0, 5.0))
    assert iteration.trajectory.applied("P").last == iteration.trajectory.end == 2 * HOUR
    assert iteration.solution.objective == pytest.approx(20.0 * 13.0)


def test_mpc_iterate_is_repeatable():
    horizon = Horizon.hours(2, 4, 1)
    forecasts = ForecastFeed({"load": hourly([3.0, 5.0, 4.0, 1.0])}).initial(0, horizon)

    first = mpc_iterate(0, {}, forecasts, "single_boiler", horizon)
    second = mpc_iterate(0, {}, forecasts, "single_boiler", horizon)

    assert first.trajectory == second.trajectory


def test_missing_forecast_sample_is_a_gap():
    horizon = Horizon.hours(1, 4, 1)
    forecasts = ForecastSet({"load": TimeVector((0, HOUR, 3 * HOUR), (1.0, 1.0, 1.0))})

    with pytest.raises(ForecastGap) as excinfo:
        mpc_iterate(0, {}, forecasts, "single_boiler", horizon)

    assert excinfo.value.series == "load"
    assert excinfo.value.missing_time == 2 * HOUR


def test_infeasible_window_dumps_the_lp(tmp_path):
    horizon = Horizon.hours(1, 2, 1)
    forecasts = ForecastSet({"load": hourly([3.0, 50.0])})

    with pytest.raises(InfeasibleWindow) as excinfo:
        mpc_iterate(0, {}, forecasts, "single_boiler", horizon, {"cap": 10.0}, lp_dump_dir=tmp_path)

    assert excinfo.value.status == "infeasible"
    assert (tmp_path / "single_boiler_0.lp").exists()
    assert excinfo.value.lp_path.endswith("single_boiler_0.lp")


def test_receding_update_shifts_and_tops_up():
    previous = ForecastSet({"load": hourly(range(72))})
    horizon = Horizon.hours(24, 72, 1)

    shifted = receding_update(previous, {}, 24 * HOUR)
    assert len(shifted["load"].times) == 48

    fresh = hourly([100.0 + i for i in range(24)], start=72 * HOUR)
    restored = receding_update(previous, {"load": fresh}, 24 * HOUR, 24 * HOUR, horizon)
    assert restored["load"].first == 24 * HOUR
    assert restored["load"].last == 95 * HOUR

    with pytest.raises(ForecastGap):
        receding_update(previous, {}, 24 * HOUR, 24 * HOUR, horizon)


def test_overlay_with_a_corrected_sample_wins():
    previous = ForecastSet({"load": hourly([1.0, 2.0, 3.0, 4.0])})

    updated = receding_update(previous, {"load": TimeVector((2 * HOUR,), (9.0,))}, HOUR)

    assert updated["load"].value_at(2 * HOUR) == 9.0
    assert updated["load"].value_at(3 * HOUR) == 4.0


def test_forecast_feed_wraps_past_the_data_end():
    feed = ForecastFeed({"load": hourly([1.0, 2.0, 3.0])})
    horizon = Horizon.hours(1, 4, 1)

    forecasts = feed.initial(HOUR, horizon)

    assert forecasts["load"].values == (2.0, 3.0, 1.0, 2.0)
    with pytest.raises(ForecastGap):
        ForecastFeed({"load": hourly([1.0, 2.0, 3.0])}, wrap=False).initial(HOUR, horizon)


def test_unknown_formulator():
    with pytest.raises(ValueError, match="Unsupported formulator"):
        get_formulator("crystal_ball")


def plant_a_cosimulation(load, horizon, initial=None):
    state_wiring = {name: f"plant.{name}" for name in ("E", "u", "since_stop", "since_start")}
    command_wiring = {f"{name}_cmd": f"mpc.{name}" for name in ("u", "Pb", "Pch", "Pdis")}
    return CoSimulation(
        origin=0,
        base_period=HOUR,
        sequences=[
            Sequence("ems", horizon.control_period // HOUR, ("mpc",)),
            Sequence("plant", 1, ("load", "plant")),
        ],
        modules=[
            MpcModule("mpc", state_wiring, formulator="district_heating_a"),
            SeriesSource("load"),
            PlantModuleA("plant", {"load": "load.y", **command_wiring}),
        ],
        params={
            "mpc": {"horizon": horizon, "forecasts": {"load": load}, "keep_iterations": True},
            "load": {"series": load},
            "plant": {"initial": initial or {}},
        },
    )


def test_mpc_over_the_whole_span_equals_the_monolithic_solve():
    values = [5.0 + 1.5 * math.sin(2 * math.pi * h / 24) for h in range(48)]
    load = hourly(values)
    sim = plant_a_cosimulation(load, Horizon.hours(48, 48, 1), {"E": 1.0})

    sim.run(48 * HOUR)
    monolithic = formulate_scenario_a({"E": 1.0, "u": 0.0}, values, {})
    solution = solve_milp(monolithic.problem)
    mpc, plant = sim.modules["mpc"], sim.modules["plant"]

    assert len(mpc.diagnostics) == 1
    assert mpc.diagnostics[0]["objective"] == pytest.approx(solution.objective, abs=1e-6)
    assert plant.frame()["u"].tolist() == [solution.value(var) for var in monolithic.controls["u"]]
    assert plant.frame()["E"].tolist() == pytest.approx([solution.value(var) for var in monolithic.info["energy"][1:]], abs=1e-9)
    assert plant.violation_log() == []


def test_each_window_starts_from_the_simulated_state():
    values = [4.0, 2.0, 2.0, 6.0, 7.0, 3.0] * 4
    load = hourly(values)
    sim = plant_a_cosimulation(load, Horizon.hours(6, 12, 1), {"E": 0.5})

    sim.run(24 * HOUR)
    mpc, plant = sim.modules["mpc"], sim.modules["plant"]
    frame = plant.frame().set_index("time")

    assert mpc.diagnostics_frame()["time"].tolist() == [0, 6 * HOUR, 12 * HOUR, 18 * HOUR]
    for iteration in mpc.iterations[1:]:
        assert iteration.formulation.problem.var("E_0").lb == pytest.approx(frame.loc[iteration.t - HOUR, "E"])
    assert (frame["storage_violation"] == 0.0).all()


def test_mpc_refuses_a_step_other_than_its_control_period():
    load = hourly([4.0] * 12)
    sim = CoSimulation(
        0,
        HOUR,
        [Sequence("ems", 2, ("mpc",))],
        [MpcModule("mpc", formulator="single_boiler")],
        params={"mpc": {"horizon": Horizon.hours(4, 8, 1), "forecasts": {"load": load}}},
    )

    with pytest.raises(ModuleStepFailure) as excinfo:
        sim.run(4 * HOUR)

    assert isinstance(excinfo.value.cause, InvalidHorizon)
