"""Rule-based baseline controllers for the district-heating plants.

The controllers are ordinary logic models built from the block library and run
by LogicModule, so they can be traced, exported and edited like any other
model. Both share the biomass commitment rules:

* start once the load the biomass should serve reaches ``biomass_min + on_margin``;
* stop after that load has stayed below ``biomass_min`` for ``off_delay_h``,
  but never earlier than ``stop_spacing_h`` after the previous stop;
* when running, follow the load within [min, max] and send spare biomass
  power into the storage;
* discharge the storage whenever the backup unit would otherwise run.

Plant B adds a price rule: while electricity is cheap (``price_el`` at or below
``price_threshold``) the heat pump takes the load it can carry and charges the
storage, and biomass only covers what is left.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Mapping

from cosimpc.errors import InvalidHorizon
from cosimpc.logic import ExecutionPlan, LogicGraph, LogicModule, compile_logic
from cosimpc.plants import PlantParamsA, PlantParamsB

logger = logging.getLogger(__name__)

CONTROL_OUTPUTS = ("u_cmd", "Pb_cmd", "Pch_cmd", "Pdis_cmd")


@dataclass(frozen=True)
class RbcSettings:
    on_margin: float = 0.3
    off_delay_h: float = 2.0
    # B only; None means biomass_price * cop
    price_threshold: float | None = None

    @classmethod
    def from_mapping(cls, settings: Mapping[str, Any] | None) -> "RbcSettings":
        settings = dict(settings or {})
        unknown = sorted(set(settings) - {"on_margin", "off_delay_h", "price_threshold"})
        if unknown:
            raise ValueError(f"Unknown RBC settings: {', '.join(unknown)}")
        return cls(**settings)


def _commitment(graph: LogicGraph, params, settings: RbcSettings, step_s: int) -> None:
    """Biomass on/off latch driven by ``need.y`` (the load biomass should serve)."""

    spacing_s = params.stop_spacing_h * 3600.0
    graph.add_block("start", "comparator", op="ge", b=params.biomass_min + settings.on_margin)
    graph.add_block("low", "comparator", op="lt", b=params.biomass_min)
    graph.add_block("low_sustained", "ondelay", delay=settings.off_delay_h * 3600.0)
    graph.add_block("u_prev", "delay")
    graph.add_block("was_off", "not")
    graph.add_block("since_stop", "since")
    graph.add_block("spacing_ok", "comparator", op="ge", b=spacing_s - step_s)
    graph.add_block("stop", "and")
    graph.add_block("u", "latch")
    graph.connect("need.y", "start.a")
    graph.connect("need.y", "low.a")
    graph.connect("low.y", "low_sustained.u")
    graph.connect("u.y", "u_prev.u")
    graph.connect("u_prev.y", "was_off.u")
    graph.connect("was_off.y", "since_stop.u")
    graph.connect("since_stop.y", "spacing_ok.a")
    graph.connect("low_sustained.y", "stop.a")
    graph.connect("spacing_ok.y", "stop.b")
    graph.connect("start.y", "u.set")
    graph.connect("stop.y", "u.reset")


def _storage_rates(graph: LogicGraph, params, step_s: int) -> None:
    """``room_rate`` and ``energy_rate``: MW that would fill or empty the storage in one step."""

    per_hour = 3600.0 / step_s
    graph.add_block("room", "sum", a=params.storage_capacity, kb=-1.0)
    graph.add_block("room_rate", "gain", k=per_hour)
    graph.add_block("energy_rate", "gain", k=per_hour)
    graph.add_input("E", "room.b")
    graph.add_input("E", "energy_rate.u")
    graph.connect("room.y", "room_rate.u")


def _biomass_dispatch(graph: LogicGraph, params, settings: RbcSettings, step_s: int, gate: str | None = None) -> None:
    """Biomass follows ``need.y``; headroom up to max charges the storage.

    With ``gate`` the charging (``bio_charge.y``) only happens while that signal is true.
    """

    _commitment(graph, params, settings, step_s)
    _storage_rates(graph, params, step_s)
    graph.add_block("headroom", "sum", a=params.biomass_max, kb=-1.0)
    graph.add_block("headroom_sat", "saturation", lo=0.0, hi=params.storage_power)
    graph.add_block("charge_limit", "min")
    graph.add_block("bio_charge_on", "product")
    graph.add_block("bio_charge", "product")
    graph.add_block("bio_target", "sum")
    graph.add_block("bio_clamp", "saturation", lo=params.biomass_min, hi=params.biomass_max)
    graph.add_block("pb", "product")
    graph.add_block("base_clamp", "saturation", lo=params.biomass_min, hi=params.biomass_max)
    graph.add_block("pb_base", "product")
    graph.connect("need.y", "headroom.b")
    graph.connect("headroom.y", "headroom_sat.u")
    graph.connect("headroom_sat.y", "charge_limit.a")
    graph.connect("room_rate.y", "charge_limit.b")
    graph.connect("u.y", "bio_charge_on.a")
    graph.connect("charge_limit.y", "bio_charge_on.b")
    graph.connect("bio_charge_on.y", "bio_charge.a")
    if gate is not None:
        graph.connect(gate, "bio_charge.b")
    graph.connect("need.y", "bio_target.a")
    graph.connect("bio_charge.y", "bio_target.b")
    graph.connect("bio_target.y", "bio_clamp.u")
    graph.connect("u.y", "pb.a")
    graph.connect("bio_clamp.y", "pb.b")
    graph.connect("need.y", "base_clamp.u")
    graph.connect("u.y", "pb_base.a")
    graph.connect("base_clamp.y", "pb_base.b")


def _discharge(graph: LogicGraph, params, residual: str) -> None:
    graph.add_block("residual_sat", "saturation", lo=0.0, hi=params.storage_power)
    graph.add_block("discharge", "min")
    graph.connect(residual, "residual_sat.u")
    graph.connect("residual_sat.y", "discharge.a")
    graph.connect("energy_rate.y", "discharge.b")


def rbc_graph_a(params: PlantParamsA, settings: RbcSettings | None = None, step_s: int = 3600) -> LogicGraph:
    """Merit order for plant A: biomass, then storage, gas takes the rest."""

    settings = settings or RbcSettings()
    graph = LogicGraph()
    graph.add_block("need", "gain")
    graph.add_input("load", "need.u")
    _biomass_dispatch(graph, params, settings, step_s)
    graph.add_block("residual", "sum", kb=-1.0)
    graph.add_input("load", "residual.a")
    graph.connect("pb_base.y", "residual.b")
    _discharge(graph, params, "residual.y")
    graph.add_output("u_cmd", "u.y")
    graph.add_output("Pb_cmd", "pb.y")
    graph.add_output("Pch_cmd", "bio_charge.y")
    graph.add_output("Pdis_cmd", "discharge.y")
    return graph


def rbc_graph_b(params: PlantParamsB, settings: RbcSettings | None = None, step_s: int = 900) -> LogicGraph:
    """Plant B: the heat pump is preferred while electricity is below the threshold."""

    settings = settings or RbcSettings()
    threshold = settings.price_threshold
    if threshold is None:
        threshold = params.biomass_price * params.cop
    graph = LogicGraph()
    graph.add_block("cheap", "comparator", op="le", b=threshold)
    graph.add_block("dear", "not")
    graph.add_block("hp_share", "switch", a=params.hp_max, b=0.0)
    graph.add_block("need", "sum", kb=-1.0)
    graph.add_input("price_el", "cheap.a")
    graph.connect("cheap.y", "dear.u")
    graph.connect("cheap.y", "hp_share.cond")
    graph.add_input("load", "need.a")
    graph.connect("hp_share.y", "need.b")
    # biomass headroom charges only on dear electricity, the heat pump on cheap
    _biomass_dispatch(graph, params, settings, step_s, gate="dear.y")
    graph.add_block("hp_room", "sum", a=params.hp_max, kc=-1.0)
    graph.add_block("hp_room_sat", "saturation", lo=0.0, hi=params.storage_power)
    graph.add_block("hp_charge_limit", "min")
    graph.add_block("hp_charge", "product")
    graph.add_block("charge", "max")
    graph.connect("pb_base.y", "hp_room.b")
    graph.add_input("load", "hp_room.c")
    graph.connect("hp_room.y", "hp_room_sat.u")
    graph.connect("hp_room_sat.y", "hp_charge_limit.a")
    graph.connect("room_rate.y", "hp_charge_limit.b")
    graph.connect("cheap.y", "hp_charge.a")
    graph.connect("hp_charge_limit.y", "hp_charge.b")
    graph.connect("bio_charge.y", "charge.a")
    graph.connect("hp_charge.y", "charge.b")

    graph.add_block("residual", "sum", kb=-1.0)
    graph.add_block("dear_residual", "product")
    graph.add_input("load", "residual.a")
    graph.connect("pb_base.y", "residual.b")
    graph.connect("residual.y", "dear_residual.a")
    graph.connect("dear.y", "dear_residual.b")
    _discharge(graph, params, "dear_residual.y")
    graph.add_output("u_cmd", "u.y")
    graph.add_output("Pb_cmd", "pb.y")
    graph.add_output("Pch_cmd", "charge.y")
    graph.add_output("Pdis_cmd", "discharge.y")
    return graph


def rbc_baseline_a(params: PlantParamsA | Mapping[str, Any] | None = None, settings=None, step_s: int = 3600) -> ExecutionPlan:
    if not isinstance(params, PlantParamsA):
        params = PlantParamsA.from_mapping(params)
    if not isinstance(settings, RbcSettings):
        settings = RbcSettings.from_mapping(settings)
    return compile_logic(rbc_graph_a(params, settings, step_s))


def rbc_baseline_b(params: PlantParamsB | Mapping[str, Any] | None = None, settings=None, step_s: int = 900) -> ExecutionPlan:
    if not isinstance(params, PlantParamsB):
        params = PlantParamsB.from_mapping(params)
    if not isinstance(settings, RbcSettings):
        settings = RbcSettings.from_mapping(settings)
    return compile_logic(rbc_graph_b(params, settings, step_s))


class RbcModule(LogicModule):
    """Baseline controller for plant A or B as a co-simulation module.

    Parameters: ``plant`` (plant parameter block), ``rbc`` (RbcSettings
    fields), ``step`` (seconds; the module refuses any other coupling step)
    and ``trace``.
    """

    kind = "A"

    def setup(self, t0: int, params: Mapping[str, Any]) -> dict:
        self.step_s = int(params.get("step", 3600 if self.kind == "A" else 900))
        build = rbc_baseline_a if self.kind == "A" else rbc_baseline_b
        self.plan = build(params.get("plant"), params.get("rbc"), self.step_s)
        self._declare_ports(self.plan)
        logger.debug("rbc %s compiled: %d blocks", self.module_id, len(self.plan.order))
        return super().setup(t0, params)

    def validate_step(self, t: int, dt: int) -> None:
        if dt != self.step_s:
            raise InvalidHorizon(f"RBC module {self.module_id} was built for {self.step_s} s steps, got {dt} s.")


class RbcModuleA(RbcModule):
    kind = "A"


class RbcModuleB(RbcModule):
    kind = "B"
