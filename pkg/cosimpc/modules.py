from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Mapping

from cosimpc.errors import LifecycleViolation, SlotKindMismatch, UnknownSlot
from cosimpc.exchange import INIT_TICK, ExchangeZone, SlotKind, SlotValue
from cosimpc.timebase import SampleMode, TimeVector, tv_sample

logger = logging.getLogger(__name__)

CREATED = "created"
INITIALIZED = "initialized"
RUNNING = "running"
TERMINATED = "terminated"


@dataclass(frozen=True)
class PortSpec:
    name: str
    kind: SlotKind = "scalar"
    default: float | None = None
    sample: SampleMode = "hold-last"


class SimModule(ABC):
    """Contract every co-simulated model implements.

    Subclasses declare ``inputs`` and ``outputs`` as tuples of PortSpec and
    implement ``setup`` and ``step``. The lifecycle functions below drive them;
    modules never call each other and never touch the exchange zone directly.
    """

    inputs: tuple[PortSpec, ...] = ()
    outputs: tuple[PortSpec, ...] = ()

    def __init__(self, module_id: str, wiring: Mapping[str, str] | None = None):
        self.module_id = module_id
        self.wiring: dict[str, str] = dict(wiring or {})
        self.state = CREATED
        self.stop_requested = False

    def output_slot(self, port: str) -> str:
        return f"{self.module_id}.{port}"

    def input_slots(self) -> list[str]:
        return [self.wiring[port.name] for port in self.inputs if port.name in self.wiring]

    def output_slots(self) -> list[str]:
        return [self.output_slot(port.name) for port in self.outputs]

    @abstractmethod
    def setup(self, t0: int, params: Mapping[str, Any]) -> dict[str, SlotValue]:
        """Prepare internal state and return the initial output values."""

    @abstractmethod
    def step(self, t: int, dt: int, inputs: dict[str, SlotValue]) -> dict[str, SlotValue]:
        """Advance from ``t`` to ``t + dt`` and return the refreshed outputs."""

    def validate_step(self, t: int, dt: int) -> None:
        """Veto hook for the coupling step; raise to refuse ``dt``."""

    def before_step(self, t: int) -> None:
        pass

    def after_step(self, t: int) -> None:
        pass

    def finish(self) -> None:
        pass

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.module_id!r}, state={self.state})"


def _require(module: SimModule, allowed: tuple[str, ...], call: str) -> None:
    if module.state not in allowed:
        raise LifecycleViolation(f"{call} on module {module.module_id} in state {module.state}")


def _publish(module: SimModule, outputs: Mapping[str, SlotValue], zone: ExchangeZone, tick: int) -> dict[str, SlotValue]:
    declared = {port.name for port in module.outputs}
    unknown = sorted(set(outputs) - declared)
    if unknown:
        raise LifecycleViolation(f"Module {module.module_id} wrote undeclared outputs: {', '.join(unknown)}")
    written = {}
    for port in module.outputs:
        if port.name not in outputs:
            continue
        slot = module.output_slot(port.name)
        entry = zone.write(slot, outputs[port.name], module.module_id, tick)
        written[slot] = entry.value
    return written


def initialize(module: SimModule, t0: int, params: Mapping[str, Any] | None = None, zone: ExchangeZone | None = None) -> dict[str, SlotValue]:
    _require(module, (CREATED,), "initialize")
    outputs = module.setup(t0, params or {})
    module.state = INITIALIZED
    if zone is not None and outputs:
        _publish(module, outputs, zone, INIT_TICK)
    return outputs


def pre_step(module: SimModule, t: int) -> None:
    _require(module, (INITIALIZED, RUNNING), "pre_step")
    module.state = RUNNING
    module.before_step(t)


def read_inputs(module: SimModule, t: int, zone: ExchangeZone) -> dict[str, SlotValue]:
    """Collect the module's declared inputs from the zone at time ``t``."""

    values: dict[str, SlotValue] = {}
    for port in module.inputs:
        slot = module.wiring.get(port.name)
        if slot is None or slot not in zone:
            if port.default is None:
                raise UnknownSlot(slot or f"{module.module_id}:{port.name}")
            values[port.name] = port.default
            continue
        value, _ = zone.read(slot)
        if isinstance(value, TimeVector):
            if port.kind == "scalar":
                value = tv_sample(value, t, port.sample)
        elif port.kind == "time-vector":
            raise SlotKindMismatch(slot, "time-vector", "scalar")
        values[port.name] = value
    return values


def compute_step(module: SimModule, t: int, dt: int, inputs: dict[str, SlotValue]) -> dict[str, SlotValue]:
    _require(module, (RUNNING,), "do_step")
    module.validate_step(t, dt)
    return module.step(t, dt, inputs)


def do_step(module: SimModule, t: int, dt: int, zone: ExchangeZone, tick: int) -> dict[str, SlotValue]:
    """Read inputs, advance the module over ``[t, t + dt)`` and write its outputs with ``tick``."""

    if module.state == INITIALIZED:
        module.state = RUNNING
    _require(module, (RUNNING,), "do_step")
    outputs = compute_step(module, t, dt, read_inputs(module, t, zone))
    return _publish(module, outputs, zone, tick)


def publish_outputs(module: SimModule, outputs: Mapping[str, SlotValue], zone: ExchangeZone, tick: int) -> dict[str, SlotValue]:
    return _publish(module, outputs, zone, tick)


def post_step(module: SimModule, t: int) -> None:
    _require(module, (RUNNING,), "post_step")
    module.after_step(t)


def terminate(module: SimModule) -> None:
    _require(module, (INITIALIZED, RUNNING), "terminate")
    try:
        module.finish()
    finally:
        module.state = TERMINATED
    logger.debug("module %s terminated", module.module_id)
