"""Seeded synthetic heat-load and electricity-price series.

The load is a seasonal cosine (winter peak, summer floor for hot water) times
a daily profile with morning and evening bumps, times a little multiplicative
noise, then scaled so the year sums to the requested energy.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from cosimpc.config import DEFAULT_SEED
from cosimpc.errors import SpecInfeasible
from cosimpc.timebase import TimeVector

logger = logging.getLogger(__name__)

HOURS_PER_YEAR = 8760


@dataclass(frozen=True)
class SyntheticLoadSpec:
    annual_mwh: float = 21_217.0
    seed: int = DEFAULT_SEED
    step_s: int = 3600
    hours: int = HOURS_PER_YEAR
    start: int = 0
    # seasonal factor runs from summer_floor (mid July) to 1 (mid January)
    summer_floor: float = 0.25
    morning_peak_h: float = 7.0
    evening_peak_h: float = 19.0
    peak_height: float = 0.45
    peak_width_h: float = 1.5
    noise: float = 0.05
    max_peak_mw: float | None = None

    def __post_init__(self):
        if self.annual_mwh <= 0:
            raise SpecInfeasible("Annual load must be positive.")
        if self.step_s <= 0 or 3600 % self.step_s and self.step_s % 3600:
            raise SpecInfeasible(f"Load step {self.step_s} s must divide or be a multiple of one hour.")
        if not 0.0 <= self.summer_floor <= 1.0:
            raise SpecInfeasible("summer_floor must lie in [0, 1].")
        if not 0.0 <= self.noise < 0.5:
            raise SpecInfeasible("noise must lie in [0, 0.5).")

    @classmethod
    def from_mapping(cls, spec: Mapping[str, Any] | None) -> "SyntheticLoadSpec":
        spec = dict(spec or {})
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(spec) - known)
        if unknown:
            raise ValueError(f"Unknown load generator fields: {', '.join(unknown)}")
        return cls(**spec)

    @property
    def n_points(self) -> int:
        return int(round(self.hours * 3600 / self.step_s))


def _daily_shape(hour_of_day: np.ndarray, spec: SyntheticLoadSpec) -> np.ndarray:
    shape = np.ones_like(hour_of_day)
    for centre in (spec.morning_peak_h, spec.evening_peak_h):
        # distance on the 24 h circle
        distance = np.abs((hour_of_day - centre + 12.0) % 24.0 - 12.0)
        shape += spec.peak_height * np.exp(-0.5 * (distance / spec.peak_width_h) ** 2)
    night = np.abs((hour_of_day - 3.0 + 12.0) % 24.0 - 12.0) < 3.0
    shape[night] *= 0.8
    return shape


def generate_synthetic_load(spec: SyntheticLoadSpec | Mapping[str, Any] | None = None) -> TimeVector:
    """Return the load in MW, one point per ``step_s``, summing to ``annual_mwh``.

    Raises SpecInfeasible when the normalized peak exceeds ``max_peak_mw``.
    """

    if not isinstance(spec, SyntheticLoadSpec):
        spec = SyntheticLoadSpec.from_mapping(spec)
    step_h = spec.step_s / 3600.0
    hours = np.arange(spec.n_points) * step_h
    day = hours / 24.0
    seasonal = spec.summer_floor + (1.0 - spec.summer_floor) * 0.5 * (1.0 + np.cos(2.0 * np.pi * (day - 15.0) / 365.0))
    daily = _daily_shape(hours % 24.0, spec)
    rng = np.random.default_rng(spec.seed)
    noise = np.clip(1.0 + spec.noise * rng.standard_normal(spec.n_points), 0.0, None)
    profile = seasonal * daily * noise
    load = profile * spec.annual_mwh * (spec.hours / HOURS_PER_YEAR) / (profile.sum() * step_h)
    peak = float(load.max())
    if spec.max_peak_mw is not None and peak > spec.max_peak_mw:
        raise SpecInfeasible(f"Synthetic load peak {peak:.3f} MW exceeds the servable capacity {spec.max_peak_mw:.3f} MW.")
    logger.debug("synthetic load: %d points, peak %.3f MW, seed %d", spec.n_points, peak, spec.seed)
    return TimeVector.regular(spec.start, spec.step_s, load.tolist(), unit="MW")


@dataclass(frozen=True)
class PriceSpec:
    """Two-level electricity tariff with optional seeded noise, in EUR/MWh_el."""

    off_peak: float = 60.0
    peak: float = 150.0
    peak_start_h: float = 7.0
    peak_end_h: float = 22.0
    weekend_off_peak: bool = True
    noise: float = 0.0
    seed: int = DEFAULT_SEED
    step_s: int = 900
    hours: int = HOURS_PER_YEAR
    start: int = 0

    def __post_init__(self):
        if self.off_peak < 0 or self.peak < 0:
            raise SpecInfeasible("Prices must not be negative.")
        if not 0.0 <= self.peak_start_h < self.peak_end_h <= 24.0:
            raise SpecInfeasible("Peak window must satisfy 0 <= start < end <= 24.")

    @classmethod
    def from_mapping(cls, spec: Mapping[str, Any] | None) -> "PriceSpec":
        spec = dict(spec or {})
        unknown = sorted(set(spec) - set(cls.__dataclass_fields__))
        if unknown:
            raise ValueError(f"Unknown price generator fields: {', '.join(unknown)}")
        return cls(**spec)


def generate_price_series(spec: PriceSpec | Mapping[str, Any] | None = None) -> TimeVector:
    if not isinstance(spec, PriceSpec):
        spec = PriceSpec.from_mapping(spec)
    n_points = int(round(spec.hours * 3600 / spec.step_s))
    hours = np.arange(n_points) * spec.step_s / 3600.0
    hour_of_day = hours % 24.0
    peak = (hour_of_day >= spec.peak_start_h) & (hour_of_day < spec.peak_end_h)
    if spec.weekend_off_peak:
        peak &= (hours // 24.0) % 7 < 5
    price = np.where(peak, spec.peak, spec.off_peak)
    if spec.noise:
        rng = np.random.default_rng(spec.seed)
        price = np.clip(price * (1.0 + spec.noise * rng.standard_normal(n_points)), 0.0, None)
    return TimeVector.regular(spec.start, spec.step_s, price.tolist(), unit="EUR/MWh")
