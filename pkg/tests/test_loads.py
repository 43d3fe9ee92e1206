import numpy as np
import pytest

from cosimpc.errors import SpecInfeasible
from cosimpc.loads import PriceSpec, SyntheticLoadSpec, generate_price_series, generate_synthetic_load
from cosimpc.plants import PlantParamsA


def test_yearly_load_hits_the_annual_energy():
    load = generate_synthetic_load(SyntheticLoadSpec())
    values = np.array(load.values)

    assert len(values) == 8760
    assert values.sum() == pytest.approx(21_217.0, rel=0.005)
    assert values.min() >= 0.0
    assert values.max() <= PlantParamsA().servable_peak
    assert load.unit == "MW"


def test_same_seed_same_series():
    first = generate_synthetic_load({"seed": 7})
    second = generate_synthetic_load({"seed": 7})
    other = generate_synthetic_load({"seed": 8})

    assert first == second
    assert first != other


def test_winter_is_colder_than_summer():
    values = np.array(generate_synthetic_load().values)

    assert values[: 31 * 24].mean() > 2.0 * values[181 * 24 : 212 * 24].mean()


def test_daily_profile_has_morning_and_evening_peaks():
    spec = SyntheticLoadSpec(noise=0.0)
    day = np.array(generate_synthetic_load(spec).values[:24])

    assert day[7] > day[3] and day[19] > day[13]


def test_quarter_hour_load_for_plant_b():
    load = generate_synthetic_load({"annual_mwh": 12_000.0, "step_s": 900})

    assert len(load.times) == 35_040
    assert sum(load.values) * 0.25 == pytest.approx(12_000.0, rel=0.005)


def test_peak_above_capacity_is_infeasible():
    with pytest.raises(SpecInfeasible, match="exceeds the servable capacity"):
        generate_synthetic_load({"max_peak_mw": 3.0})


def test_load_spec_validation():
    with pytest.raises(ValueError, match="Unknown load generator fields"):
        generate_synthetic_load({"annual": 1})
    with pytest.raises(SpecInfeasible):
        SyntheticLoadSpec(annual_mwh=-1)
    with pytest.raises(SpecInfeasible):
        SyntheticLoadSpec(step_s=7000)


def test_two_level_tariff():
    price = np.array(generate_price_series(PriceSpec(hours=7 * 24)).values)
    monday = price[: 96]
    sunday = price[6 * 96 :]

    assert monday[:28].tolist() == [60.0] * 28
    assert monday[28:88].tolist() == [150.0] * 60
    assert set(sunday.tolist()) == {60.0}
    assert price.max() / price.min() >= 2.0


def test_price_noise_is_seeded():
    spec = {"noise": 0.1, "seed": 3, "hours": 48}

    assert generate_price_series(spec) == generate_price_series(spec)
    assert min(generate_price_series(spec).values) >= 0.0
