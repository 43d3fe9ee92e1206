import numpy as np
import pytest

from cosimpc.errors import AllPointsExpired, InvalidTimeVector, OutOfRange, ScheduleError
from cosimpc.timebase import (
    TimeGrid,
    TimeVector,
    read_timevector_csv,
    tv_overlay,
    tv_sample,
    tv_sample_cyclic,
    tv_shift,
    write_timevector_csv,
)


def test_time_grid_uses_integer_ticks():
    grid = TimeGrid(1_700_000_000, 3600)
    grid.advance(8760 * 3)

    assert grid.now == 1_700_000_000 + 8760 * 3 * 3600
    assert grid.ticks_until(1_700_000_000 + 48 * 3600) == 48


def test_time_grid_rejects_non_multiple_end_and_bad_period():
    grid = TimeGrid(0, 900)

    with pytest.raises(ScheduleError):
        grid.ticks_until(1000)
    with pytest.raises(ScheduleError):
        TimeGrid(0, 0)


def test_time_vector_validates_shape_and_order():
    with pytest.raises(InvalidTimeVector):
        TimeVector((), ())
    with pytest.raises(InvalidTimeVector):
        TimeVector((0, 1), (1.0,))
    with pytest.raises(InvalidTimeVector, match="strictly increasing"):
        TimeVector((0, 0), (1.0, 2.0))


def test_tv_shift_drops_points_before_new_origin():
    tv = TimeVector((0, 3600, 7200), (1, 2, 3))

    shifted = tv_shift(tv, 3600)

    assert shifted.times == (3600, 7200)
    assert shifted.values == (2.0, 3.0)
    assert tv_shift(tv, 0) == tv


def test_tv_shift_past_span_raises():
    with pytest.raises(AllPointsExpired):
        tv_shift(TimeVector((0, 3600), (1, 2)), 7200)


@pytest.mark.parametrize("seed", range(10))
def test_tv_shift_composes(seed):
    rng = np.random.default_rng(seed)
    tv = TimeVector.regular(int(rng.integers(0, 10**9)), 900, rng.normal(size=20))
    dt1 = 900 * int(rng.integers(0, 10))
    dt2 = 900 * int(rng.integers(0, 10))

    assert tv_shift(tv_shift(tv, dt1), dt2) == tv_shift(tv, dt1 + dt2)


def test_tv_sample_modes():
    tv = TimeVector((0, 10), (0, 10))

    assert tv_sample(tv, 5, "linear") == 5.0
    assert tv_sample(tv, 5, "hold-last") == 0.0
    assert tv_sample(tv, 10, "linear") == 10.0
    assert tv_sample(tv, 10, "hold-last") == 10.0
    with pytest.raises(OutOfRange):
        tv_sample(tv, 11)


def test_tv_sample_linear_hits_stored_values_exactly():
    tv = TimeVector((0, 7, 19, 40), (0.1, 0.7, -3.3, 1e-9))

    assert [tv_sample(tv, t, "linear") for t in tv.times] == list(tv.values)


def test_tv_sample_cyclic_wraps_past_end():
    tv = TimeVector.regular(0, 3600, [1.0, 2.0, 3.0])

    assert tv_sample_cyclic(tv, 3 * 3600) == 1.0
    assert tv_sample_cyclic(tv, 4 * 3600 + 10) == 2.0


def test_tv_overlay_new_values_win():
    base = TimeVector((0, 10, 20), (1, 2, 3))
    update = TimeVector((20, 30), (9, 4))

    merged = tv_overlay(base, update)

    assert merged.times == (0, 10, 20, 30)
    assert merged.values == (1.0, 2.0, 9.0, 4.0)


def test_csv_form_round_trips(tmp_path):
    tv = TimeVector((1_700_000_000, 1_700_003_600), (0.1, 2.5), "MW")

    path = write_timevector_csv(tv, tmp_path / "load.csv")

    assert path.read_text().splitlines()[0] == "time,value"
    assert read_timevector_csv(path, "MW") == tv


def test_csv_with_wrong_header_is_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,v\n0,1\n")

    with pytest.raises(InvalidTimeVector, match="time,value"):
        read_timevector_csv(path)
