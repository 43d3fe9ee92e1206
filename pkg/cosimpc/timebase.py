from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal

import numpy as np
import pandas as pd

from cosimpc.errors import AllPointsExpired, InvalidTimeVector, OutOfRange, ScheduleError

SampleMode = Literal["hold-last", "linear"]
SAMPLE_MODES = ("hold-last", "linear")


class TimeGrid:
    """Integer time bookkeeping: ``time = origin + tick * base_period`` in seconds."""

    __slots__ = ("_origin", "_base_period", "tick")

    def __init__(self, origin: int, base_period: int, tick: int = 0):
        if int(base_period) != base_period or base_period <= 0:
            raise ScheduleError(f"Base period must be a positive integer number of seconds, got {base_period}.")
        if tick < 0:
            raise ScheduleError("Tick counter cannot be negative.")
        self._origin = int(origin)
        self._base_period = int(base_period)
        self.tick = int(tick)

    @property
    def origin(self) -> int:
        return self._origin

    @property
    def base_period(self) -> int:
        return self._base_period

    @property
    def now(self) -> int:
        return self.time_at(self.tick)

    def time_at(self, tick: int) -> int:
        return self._origin + tick * self._base_period

    def advance(self, ticks: int = 1) -> int:
        self.tick += ticks
        return self.now

    def ticks_until(self, t_end: int) -> int:
        """Return N such that ``t_end = origin + N * base_period`` or raise."""

        span = int(t_end) - self._origin
        if span < 0 or span % self._base_period:
            raise ScheduleError(
                f"End time {t_end} is not origin {self._origin} plus a whole number of {self._base_period} s periods."
            )
        return span // self._base_period


@dataclass(frozen=True)
class TimeVector:
    """Timestamped value sequence; immutable once built."""

    times: tuple[int, ...]
    values: tuple[float, ...]
    unit: str = ""

    def __post_init__(self):
        times = tuple(int(t) for t in self.times)
        values = tuple(float(v) for v in self.values)
        if not times:
            raise InvalidTimeVector("A time-vector needs at least one point.")
        if len(times) != len(values):
            raise InvalidTimeVector(f"{len(times)} times but {len(values)} values.")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise InvalidTimeVector("Time-vector times must be strictly increasing.")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @classmethod
    def regular(cls, start: int, step: int, values: Iterable[float], unit: str = "") -> "TimeVector":
        values = tuple(values)
        return cls(tuple(start + i * step for i in range(len(values))), values, unit)

    @property
    def first(self) -> int:
        return self.times[0]

    @property
    def last(self) -> int:
        return self.times[-1]

    @property
    def span(self) -> int:
        return self.times[-1] - self.times[0]

    def __len__(self) -> int:
        return len(self.times)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def is_finite(self) -> bool:
        return all(math.isfinite(value) for value in self.values)

    def value_at(self, t: int) -> float | None:
        """Return the stored value at exactly ``t``, if any."""

        index = bisect.bisect_left(self.times, t)
        if index < len(self.times) and self.times[index] == t:
            return self.values[index]
        return None

    def window(self, start: int, stop: int) -> "TimeVector | None":
        """Return the points with ``start <= time < stop`` or None when empty."""

        lo = bisect.bisect_left(self.times, start)
        hi = bisect.bisect_left(self.times, stop)
        if lo >= hi:
            return None
        return TimeVector(self.times[lo:hi], self.values[lo:hi], self.unit)


def tv_shift(tv: TimeVector, dt: int) -> TimeVector:
    """Drop the points of ``tv`` earlier than ``tv.times[0] + dt``; times are unchanged."""

    if dt < 0:
        raise ValueError("Shift must be non-negative.")
    if dt > tv.span:
        raise AllPointsExpired(dt, tv.span)
    start = bisect.bisect_left(tv.times, tv.first + dt)
    return TimeVector(tv.times[start:], tv.values[start:], tv.unit)


def tv_sample(tv: TimeVector, t: int | float, mode: SampleMode = "hold-last") -> float:
    """Sample ``tv`` at ``t`` with step (hold-last) or linear semantics."""

    if mode not in SAMPLE_MODES:
        raise ValueError(f"Unknown sampling mode: {mode}")
    if t < tv.first or t > tv.last:
        raise OutOfRange(t, tv.first, tv.last)
    index = bisect.bisect_right(tv.times, t) - 1
    if mode == "hold-last" or tv.times[index] == t:
        return tv.values[index]
    t0, t1 = tv.times[index], tv.times[index + 1]
    v0, v1 = tv.values[index], tv.values[index + 1]
    return v0 + (v1 - v0) * (t - t0) / (t1 - t0)


def cyclic_period(tv: TimeVector) -> int:
    """Return the repeat period of ``tv`` when played cyclically (span plus the last interval)."""

    if len(tv) == 1:
        return 1
    return tv.span + (tv.times[-1] - tv.times[-2])


def tv_sample_cyclic(tv: TimeVector, t: int, mode: SampleMode = "hold-last", period: int | None = None) -> float:
    """Sample ``tv`` as if it repeated forever with the given period."""

    period = period or cyclic_period(tv)
    folded = tv.first + (int(t) - tv.first) % period
    if folded <= tv.last:
        return tv_sample(tv, folded, mode)
    if mode == "hold-last":
        return tv.values[-1]
    gap = tv.first + period - tv.last
    return tv.values[-1] + (tv.values[0] - tv.values[-1]) * (folded - tv.last) / gap


def tv_overlay(base: TimeVector | None, update: TimeVector | None) -> TimeVector:
    """Merge two vectors; on equal times the value from ``update`` wins."""

    if base is None and update is None:
        raise InvalidTimeVector("Nothing to overlay.")
    if base is None:
        return update
    if update is None:
        return base
    merged = dict(zip(base.times, base.values))
    merged.update(zip(update.times, update.values))
    times = sorted(merged)
    return TimeVector(tuple(times), tuple(merged[t] for t in times), update.unit or base.unit)


def tv_check_unit(tv: TimeVector, unit: str) -> None:
    if unit and tv.unit and tv.unit != unit:
        raise InvalidTimeVector(f"Unit mismatch: expected {unit}, got {tv.unit}.")


def read_timevector_csv(path: str | Path, unit: str = "") -> TimeVector:
    """Read the ``time,value`` CSV form (integer epoch seconds)."""

    frame = pd.read_csv(path)
    if list(frame.columns[:2]) != ["time", "value"]:
        raise InvalidTimeVector(f"{path}: expected header 'time,value', got {','.join(frame.columns)}")
    return TimeVector(
        tuple(int(t) for t in frame["time"].to_numpy()),
        tuple(float(v) for v in frame["value"].to_numpy()),
        unit,
    )


def write_timevector_csv(tv: TimeVector, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame({"time": np.asarray(tv.times, dtype=np.int64), "value": tv.as_array()})
    frame.to_csv(path, index=False, float_format="%.17g")
    return path
