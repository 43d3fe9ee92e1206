import numpy as np
import pytest

from cosimpc.engine import CoSimulation, Sequence
from cosimpc.errors import SpecInfeasible
from cosimpc.plants import (
    MIN_UP_TIME,
    PlantModuleA,
    PlantModuleB,
    PlantParamsA,
    PlantParamsB,
    PlantState,
    check_servable,
    simulate_plant_step,
)
from cosimpc.testplants import ConstantSource, SeriesSource
from cosimpc.timebase import TimeVector


def test_full_storage_overflow_is_recorded():
    params = PlantParamsA()
    step = simulate_plant_step(params, PlantState(E=2.0), {"Pch": 1.0}, load=5.0, dt_h=1.0)

    assert step.state.E == 2.0
    assert [str(v) for v in step.violations] == ["storage overflow 1 MWh"]
    assert step.outputs["storage_violation"] == pytest.approx(1.0)
    assert step.outputs["Pg"] == pytest.approx(5.0)


def test_biomass_is_clamped_to_minimum_power():
    step = simulate_plant_step(PlantParamsA(), PlantState(u=1), {"u": 1, "Pb": 0.5}, load=5.0, dt_h=1.0)

    assert step.outputs["Pb"] == pytest.approx(1.22)
    assert step.outputs["Pg"] == pytest.approx(5.0 - 1.22)


def test_balanced_commands_have_no_violations():
    controls = {"u": 1, "Pb": 3.05, "Pch": 0.0, "Pdis": 1.0}
    step = simulate_plant_step(PlantParamsA(), PlantState(E=1.5, u=1), controls, load=5.0, dt_h=1.0)

    assert step.violations == []
    assert step.state.E == pytest.approx(0.5)
    assert step.outputs["Pg"] == pytest.approx(0.95)
    assert step.outputs["imbalance"] == pytest.approx(0.0, abs=1e-12)


def test_stop_and_start_counters():
    params = PlantParamsA()
    on = PlantState(u=1, since_stop_h=30.0, since_start_h=5.0)

    stopped = simulate_plant_step(params, on, {"u": 0}, load=2.0, dt_h=1.0)
    running = simulate_plant_step(params, on, {"u": 1, "Pb": 2.0}, load=2.0, dt_h=1.0)

    assert stopped.outputs["stop"] == 1.0
    assert stopped.state.since_stop_h == 1.0
    assert stopped.state.since_start_h == 6.0
    assert running.outputs["stop"] == 0.0
    assert running.state.since_stop_h == 31.0


def test_unmet_load_and_surplus_are_violations_not_errors():
    params = PlantParamsA()
    short = simulate_plant_step(params, PlantState(), {}, load=12.0, dt_h=1.0)
    long = simulate_plant_step(params, PlantState(u=1), {"u": 1, "Pb": 3.05}, load=1.0, dt_h=1.0)

    assert short.outputs["unmet"] == pytest.approx(2.2)
    assert [v.kind for v in short.violations] == ["unmet load"]
    assert long.outputs["surplus"] == pytest.approx(2.05)
    assert long.outputs["Pg"] == 0.0


def test_plant_b_prices_the_heat_pump():
    params = PlantParamsB()
    step = simulate_plant_step(params, PlantState(u=1), {"u": 1, "Pb": 2.0}, load=3.0, dt_h=0.25, price_el=90.0)

    assert step.outputs["Php"] == pytest.approx(1.0)
    assert step.outputs["cost"] == pytest.approx(0.25 * (30.0 * 2.0 + 90.0 / 3.0 * 1.0))
    with pytest.raises(ValueError, match="electricity price"):
        simulate_plant_step(params, PlantState(), {}, load=1.0, dt_h=0.25)


def test_carbon_price_adds_to_cost():
    params = PlantParamsA(carbon_price=100.0)
    step = simulate_plant_step(params, PlantState(), {}, load=2.0, dt_h=1.0)

    assert step.outputs["co2"] == pytest.approx(2.0 * 0.227)
    assert step.outputs["cost"] == pytest.approx(2.0 * 35.0 + 100.0 * 2.0 * 0.227)


@pytest.mark.parametrize("seed", range(20))
def test_random_commands_keep_physics(seed):
    rng = np.random.default_rng(seed)
    params = PlantParamsA()
    state = PlantState(E=float(rng.uniform(0, 2)), u=int(rng.integers(0, 2)))
    for _ in range(48):
        controls = {
            "u": float(rng.integers(0, 2)),
            "Pb": float(rng.uniform(-1, 4)),
            "Pch": float(rng.uniform(0, 1.5)),
            "Pdis": float(rng.uniform(0, 1.5)),
        }
        load = float(rng.uniform(0, 13))
        step = simulate_plant_step(params, state, controls, load, dt_h=1.0)
        out = step.outputs
        produced = out["Pg"] + out["Pb"] + out["Pdis"] - out["Pch"]

        assert 0.0 <= step.state.E <= params.storage_capacity
        assert out["Pb"] == 0.0 or params.biomass_min - 1e-12 <= out["Pb"] <= params.biomass_max
        assert produced - load == pytest.approx(out["surplus"] - out["unmet"], abs=1e-12)
        state = step.state


def test_params_validation():
    with pytest.raises(SpecInfeasible, match="fraction"):
        PlantParamsA(biomass_min_fraction=1.2)
    with pytest.raises(SpecInfeasible, match="COP"):
        PlantParamsB(cop=0.9)
    with pytest.raises(SpecInfeasible, match="stop rule"):
        PlantParamsA(stop_rule="sometimes")
    with pytest.raises(ValueError, match="Unknown PlantParamsA fields"):
        PlantParamsA.from_mapping({"gas_maximum": 3})
    assert PlantParamsA.from_mapping({"stop_rule": MIN_UP_TIME}).stop_rule == MIN_UP_TIME


def test_storage_sizing_scales_power():
    params = PlantParamsA().with_storage(4.0)

    assert params.storage_capacity == 4.0
    assert params.storage_power == 2.0
    assert PlantParamsA().with_storage(0.0).storage_power == 0.0


def test_servable_peak():
    check_servable(PlantParamsA(), 13.85)
    with pytest.raises(SpecInfeasible, match="exceeds"):
        check_servable(PlantParamsA(), 14.0)


def test_plant_module_in_a_cosimulation():
    load = TimeVector.regular(0, 3600, [4.0, 6.0, 2.0, 5.0])
    sim = CoSimulation(
        origin=0,
        base_period=3600,
        sequences=[Sequence("plant", 1, ("load", "bio", "plant"))],
        modules=[
            SeriesSource("load"),
            ConstantSource("bio"),
            PlantModuleA("plant", {"load": "load.y", "u_cmd": "bio.y", "Pb_cmd": "bio.y"}),
        ],
        params={
            "load": {"series": load},
            "bio": {"value": 2.0},
            "plant": {"initial": {"E": 1.0}},
        },
    )

    results = sim.run(4 * 3600)
    plant = sim.modules["plant"]

    assert list(results.scalar_series("plant.Pg").values) == pytest.approx([2.0, 4.0, 0.0, 3.0])
    assert plant.energies["biomass"] == pytest.approx(8.0)
    assert plant.energies["Pg"] == pytest.approx(9.0)
    assert plant.frame()["E"].tolist() == [1.0, 1.0, 1.0, 1.0]
    assert plant.violation_log() == []


def test_plant_module_rejects_initial_energy_outside_capacity():
    sim = CoSimulation(
        0,
        3600,
        [Sequence("plant", 1, ("plant",))],
        [PlantModuleB("plant", {})],
        params={"plant": {"initial": {"E": 3.0}}},
    )

    with pytest.raises(SpecInfeasible, match="outside"):
        sim.run(3600)
