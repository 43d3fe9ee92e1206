"""District-heating production plants as discrete-time models.

Plant A: gas boiler, biomass boiler and a lossless heat storage; the gas
boiler covers whatever the commanded units leave open. Plant B: biomass
boiler, heat pump and storage; the heat pump takes the residual.

Prices are per MWh of delivered heat, energies are MWh, powers MW.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Mapping, Union

import pandas as pd

from cosimpc.errors import SpecInfeasible
from cosimpc.modules import PortSpec, SimModule

logger = logging.getLogger(__name__)

STOP_SPACING = "stop_spacing"
MIN_UP_TIME = "min_up_time"
STOP_RULES = (STOP_SPACING, MIN_UP_TIME)

# counters start far in the past so no timing rule binds at the first window
LONG_AGO_H = 1.0e6

# smaller discrepancies are float dust from the optimizer, not violations
VIOLATION_TOL = 1e-9


def _from_mapping(cls, params: Mapping[str, Any] | None):
    params = dict(params or {})
    known = {item.name for item in fields(cls)}
    unknown = sorted(set(params) - known)
    if unknown:
        raise ValueError(f"Unknown {cls.__name__} fields: {', '.join(unknown)}")
    return cls(**params)


def _check_common(params) -> None:
    if not 0.0 < params.biomass_min_fraction < 1.0:
        raise SpecInfeasible("Biomass minimum fraction must lie in (0, 1).")
    for name in ("biomass_max", "storage_capacity", "storage_power", "stop_spacing_h"):
        if getattr(params, name) < 0:
            raise SpecInfeasible(f"{name} must not be negative.")
    if params.biomass_max <= 0:
        raise SpecInfeasible("biomass_max must be positive.")
    if params.stop_rule not in STOP_RULES:
        raise SpecInfeasible(f"Unknown stop rule {params.stop_rule}; expected one of {', '.join(STOP_RULES)}.")
    if params.min_window_share is not None and not 0.0 <= params.min_window_share <= 1.0:
        raise SpecInfeasible("min_window_share must lie in [0, 1].")
    if params.carbon_price < 0:
        raise SpecInfeasible("carbon_price must not be negative.")


@dataclass(frozen=True)
class PlantParamsA:
    annual_load_mwh: float = 21_217.0
    renewable_target: float = 0.60
    gas_max: float = 9.8
    biomass_max: float = 3.05
    biomass_min_fraction: float = 0.40
    storage_capacity: float = 2.0
    storage_power: float = 1.0
    stop_spacing_h: float = 10.0
    gas_price: float = 35.0
    biomass_price: float = 30.0
    stop_rule: str = STOP_SPACING
    min_window_share: float | None = None
    carbon_price: float = 0.0
    gas_co2: float = 0.227
    biomass_co2: float = 0.0

    kind = "A"

    def __post_init__(self):
        _check_common(self)
        if self.gas_max <= 0 or self.annual_load_mwh <= 0:
            raise SpecInfeasible("gas_max and annual_load_mwh must be positive.")
        if not (math.isfinite(self.gas_price) and math.isfinite(self.biomass_price)):
            raise SpecInfeasible("Prices must be finite.")

    @classmethod
    def from_mapping(cls, params: Mapping[str, Any] | None = None) -> "PlantParamsA":
        return _from_mapping(cls, params)

    @property
    def biomass_min(self) -> float:
        return self.biomass_min_fraction * self.biomass_max

    @property
    def residual_max(self) -> float:
        return self.gas_max

    @property
    def servable_peak(self) -> float:
        return self.gas_max + self.biomass_max + self.storage_power

    def with_storage(self, capacity: float, discharge_hours: float = 2.0) -> "PlantParamsA":
        power = capacity / discharge_hours if discharge_hours > 0 else 0.0
        return replace(self, storage_capacity=float(capacity), storage_power=power)


@dataclass(frozen=True)
class PlantParamsB:
    annual_load_mwh: float = 12_000.0
    renewable_target: float = 0.60
    biomass_max: float = 2.5
    biomass_min_fraction: float = 0.40
    biomass_price: float = 30.0
    hp_max: float = 2.0
    hp_min_fraction: float = 0.30
    cop: float = 3.0
    storage_capacity: float = 2.0
    storage_power: float = 1.0
    stop_spacing_h: float = 0.0
    stop_rule: str = STOP_SPACING
    min_window_share: float | None = None
    carbon_price: float = 0.0
    biomass_co2: float = 0.0
    electricity_co2: float = 0.06

    kind = "B"

    def __post_init__(self):
        _check_common(self)
        if self.cop <= 1.0:
            raise SpecInfeasible("Heat pump COP must exceed 1.")
        if self.hp_max <= 0 or not 0.0 <= self.hp_min_fraction < 1.0:
            raise SpecInfeasible("Heat pump needs a positive maximum and a minimum fraction in [0, 1).")

    @classmethod
    def from_mapping(cls, params: Mapping[str, Any] | None = None) -> "PlantParamsB":
        return _from_mapping(cls, params)

    @property
    def biomass_min(self) -> float:
        return self.biomass_min_fraction * self.biomass_max

    @property
    def hp_min(self) -> float:
        return self.hp_min_fraction * self.hp_max

    @property
    def residual_max(self) -> float:
        return self.hp_max

    @property
    def servable_peak(self) -> float:
        return self.hp_max + self.biomass_max + self.storage_power

    def with_storage(self, capacity: float, discharge_hours: float = 2.0) -> "PlantParamsB":
        power = capacity / discharge_hours if discharge_hours > 0 else 0.0
        return replace(self, storage_capacity=float(capacity), storage_power=power)


PlantParams = Union[PlantParamsA, PlantParamsB]


@dataclass(frozen=True)
class PlantState:
    E: float = 0.0
    u: int = 0
    since_stop_h: float = LONG_AGO_H
    since_start_h: float = LONG_AGO_H
    energies: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class Violation:
    kind: str
    amount_mwh: float
    time: int | None = None

    def __str__(self) -> str:
        return f"{self.kind} {self.amount_mwh:g} MWh"


@dataclass
class PlantStep:
    state: PlantState
    outputs: dict[str, float]
    violations: list[Violation]


def simulate_plant_step(
    params: PlantParams,
    state: PlantState,
    controls: Mapping[str, float],
    load: float,
    dt_h: float,
    price_el: float | None = None,
) -> PlantStep:
    """Advance the plant by ``dt_h`` hours under the commanded set points.

    Physics is enforced here whatever the controller asked for: storage is
    kept within [0, capacity], biomass within {0} or [min, max], and the
    residual unit (gas in A, heat pump in B) balances the load up to its
    maximum. Anything left over is recorded as a violation.
    """

    u = 1 if controls.get("u", 0.0) >= 0.5 else 0
    pb = min(max(controls.get("Pb", 0.0), params.biomass_min), params.biomass_max) if u else 0.0
    pch = min(max(controls.get("Pch", 0.0), 0.0), params.storage_power)
    pdis = min(max(controls.get("Pdis", 0.0), 0.0), params.storage_power)

    violations = []
    net = pch - pdis
    room_up = (params.storage_capacity - state.E) / dt_h
    room_down = state.E / dt_h
    if net > room_up:
        if (net - room_up) * dt_h > VIOLATION_TOL:
            violations.append(Violation("storage overflow", (net - room_up) * dt_h))
        net = room_up
    elif net < -room_down:
        if (-net - room_down) * dt_h > VIOLATION_TOL:
            violations.append(Violation("storage underflow", (-net - room_down) * dt_h))
        net = -room_down
    charge = max(net, 0.0)
    discharge = max(-net, 0.0)
    energy = min(max(state.E + dt_h * (charge - discharge), 0.0), params.storage_capacity)

    residual = load - pb - discharge + charge
    backup = min(max(residual, 0.0), params.residual_max)
    unmet = max(residual - params.residual_max, 0.0)
    surplus = max(-residual, 0.0)
    if unmet * dt_h > VIOLATION_TOL:
        violations.append(Violation("unmet load", unmet * dt_h))
    if surplus * dt_h > VIOLATION_TOL:
        violations.append(Violation("surplus heat", surplus * dt_h))
    imbalance = backup + pb + discharge - charge - load

    stop = 1 if state.u == 1 and u == 0 else 0
    start = 1 if state.u == 0 and u == 1 else 0
    since_stop = dt_h if stop else state.since_stop_h + dt_h
    since_start = dt_h if start else state.since_start_h + dt_h

    if params.kind == "A":
        backup_name = "Pg"
        cost = dt_h * (params.gas_price * backup + params.biomass_price * pb)
        co2 = dt_h * (params.gas_co2 * backup + params.biomass_co2 * pb)
    else:
        backup_name = "Php"
        if price_el is None:
            raise ValueError("Plant B needs an electricity price.")
        cost = dt_h * (params.biomass_price * pb + price_el / params.cop * backup)
        co2 = dt_h * (params.biomass_co2 * pb + params.electricity_co2 * backup / params.cop)
    cost += params.carbon_price * co2

    energies = dict(state.energies)
    for name, power in (("biomass", pb), (backup_name, backup), ("charge", charge), ("discharge", discharge), ("load", load)):
        energies[name] = energies.get(name, 0.0) + power * dt_h
    new_state = PlantState(energy, u, since_stop, since_start, energies)
    outputs = {
        "E": energy,
        "u": float(u),
        "since_stop": since_stop,
        "since_start": since_start,
        "Pb": pb,
        backup_name: backup,
        "Pch": charge,
        "Pdis": discharge,
        "load": load,
        "stop": float(stop),
        "imbalance": imbalance,
        "unmet": unmet,
        "surplus": surplus,
        "storage_violation": sum(v.amount_mwh for v in violations if v.kind.startswith("storage")),
        "cost": cost,
        "co2": co2,
    }
    return PlantStep(new_state, outputs, violations)


def check_servable(params: PlantParams, peak: float) -> None:
    if peak > params.servable_peak + 1e-9:
        raise SpecInfeasible(f"Load peak {peak:.3f} MW exceeds the servable capacity {params.servable_peak:.3f} MW.")


class PlantModule(SimModule):
    """Plant A or B in the co-simulation.

    Command inputs (``u_cmd``, ``Pb_cmd``, ``Pch_cmd``, ``Pdis_cmd``) default to
    zero so an unconnected plant runs on the residual unit alone.
    """

    kind = "A"

    def __init__(self, module_id: str, wiring: Mapping[str, str] | None = None):
        super().__init__(module_id, wiring)
        ports = [
            PortSpec("load"),
            PortSpec("u_cmd", default=0.0),
            PortSpec("Pb_cmd", default=0.0),
            PortSpec("Pch_cmd", default=0.0),
            PortSpec("Pdis_cmd", default=0.0),
        ]
        if self.kind == "B":
            ports.append(PortSpec("price_el"))
        self.inputs = tuple(ports)
        backup = "Pg" if self.kind == "A" else "Php"
        self.outputs = tuple(
            PortSpec(name)
            for name in (
                "E",
                "u",
                "since_stop",
                "since_start",
                "Pb",
                backup,
                "Pch",
                "Pdis",
                "load",
                "stop",
                "imbalance",
                "unmet",
                "surplus",
                "storage_violation",
                "cost",
                "co2",
            )
        )

    def setup(self, t0: int, params: Mapping[str, Any]) -> dict:
        plant = params.get("plant", {})
        param_cls = PlantParamsA if self.kind == "A" else PlantParamsB
        self.params = plant if isinstance(plant, param_cls) else param_cls.from_mapping(plant)
        initial = params.get("initial", {})
        energy = float(initial.get("E", 0.0))
        if not 0.0 <= energy <= self.params.storage_capacity:
            raise SpecInfeasible(f"Initial storage energy {energy} MWh outside [0, {self.params.storage_capacity}].")
        self.plant_state = PlantState(
            E=energy,
            u=int(initial.get("u", 0)),
            since_stop_h=float(initial.get("since_stop_h", LONG_AGO_H)),
            since_start_h=float(initial.get("since_start_h", LONG_AGO_H)),
        )
        self.rows: list[dict[str, float]] = []
        self.violations: list[Violation] = []
        return {
            "E": self.plant_state.E,
            "u": float(self.plant_state.u),
            "since_stop": self.plant_state.since_stop_h,
            "since_start": self.plant_state.since_start_h,
        }

    def step(self, t: int, dt: int, inputs: dict) -> dict:
        controls = {
            "u": inputs["u_cmd"],
            "Pb": inputs["Pb_cmd"],
            "Pch": inputs["Pch_cmd"],
            "Pdis": inputs["Pdis_cmd"],
        }
        result = simulate_plant_step(
            self.params,
            self.plant_state,
            controls,
            float(inputs["load"]),
            dt / 3600.0,
            inputs.get("price_el"),
        )
        self.plant_state = result.state
        for violation in result.violations:
            self.violations.append(replace(violation, time=t))
        self.rows.append({"time": t, "dt_h": dt / 3600.0, **result.outputs})
        return result.outputs

    @property
    def energies(self) -> dict[str, float]:
        return dict(self.plant_state.energies)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)

    def violation_log(self) -> list[dict]:
        return [asdict(violation) for violation in self.violations]


class PlantModuleA(PlantModule):
    kind = "A"


class PlantModuleB(PlantModule):
    kind = "B"
