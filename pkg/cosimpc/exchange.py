from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass
from typing import Literal, Union

from cosimpc.errors import NonFiniteValue, NotProducer, SlotKindMismatch, UnknownSlot
from cosimpc.timebase import TimeVector

SlotKind = Literal["scalar", "time-vector"]
SlotValue = Union[float, TimeVector]

logger = logging.getLogger(__name__)

INIT_TICK = -1


@dataclass(frozen=True)
class SlotEntry:
    kind: SlotKind
    value: SlotValue
    producer: str
    last_write_tick: int


def slot_kind_of(value: SlotValue) -> SlotKind:
    return "time-vector" if isinstance(value, TimeVector) else "scalar"


def _is_finite(value: SlotValue) -> bool:
    if isinstance(value, TimeVector):
        return value.is_finite()
    return math.isfinite(value)


class ExchangeZone:
    """Shared table of module outputs.

    Each slot has exactly one producer, claimed by the first write. Entries are
    immutable and swapped under a lock, so readers never see a partial update.
    A slot keeps the value with the highest tick: a write older than the
    current entry is dropped.
    """

    def __init__(self):
        self._slots: dict[str, SlotEntry] = {}
        self._lock = threading.Lock()

    def write(self, slot: str, value: SlotValue, producer: str, tick: int) -> SlotEntry:
        if not isinstance(value, TimeVector):
            value = float(value)
        if not _is_finite(value):
            raise NonFiniteValue(slot, producer, tick)
        kind = slot_kind_of(value)
        with self._lock:
            current = self._slots.get(slot)
            if current is not None:
                if current.producer != producer:
                    raise NotProducer(slot, producer, current.producer)
                if current.kind != kind:
                    raise SlotKindMismatch(slot, current.kind, kind)
                if tick < current.last_write_tick:
                    logger.debug("stale write to %s at tick %d ignored (holds tick %d)", slot, tick, current.last_write_tick)
                    return current
            entry = SlotEntry(kind=kind, value=value, producer=producer, last_write_tick=tick)
            self._slots[slot] = entry
        return entry

    def read(self, slot: str) -> tuple[SlotValue, int]:
        entry = self.entry(slot)
        return entry.value, entry.last_write_tick

    def entry(self, slot: str) -> SlotEntry:
        with self._lock:
            try:
                return self._slots[slot]
            except KeyError:
                raise UnknownSlot(slot) from None

    def __contains__(self, slot: str) -> bool:
        with self._lock:
            return slot in self._slots

    def slots(self) -> list[str]:
        with self._lock:
            return sorted(self._slots)

    def owner(self, slot: str) -> str:
        return self.entry(slot).producer


def zone_write(zone: ExchangeZone, slot: str, value: SlotValue, producer: str, tick: int) -> SlotEntry:
    return zone.write(slot, value, producer, tick)


def zone_read(zone: ExchangeZone, slot: str) -> tuple[SlotValue, int]:
    return zone.read(slot)
