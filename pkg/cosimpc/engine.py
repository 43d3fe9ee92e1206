from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, Mapping, Sequence as SequenceType

from cosimpc.errors import (
    DuplicateModuleAssignment,
    ModuleStepFailure,
    ScheduleError,
    UnknownSlot,
)
from cosimpc.exchange import ExchangeZone, SlotValue
from cosimpc.modules import (
    INITIALIZED,
    RUNNING,
    SimModule,
    compute_step,
    initialize,
    post_step,
    pre_step,
    publish_outputs,
    read_inputs,
    terminate,
)
from cosimpc.timebase import TimeGrid, TimeVector, write_timevector_csv

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Sequence:
    name: str
    period_multiplier: int
    modules: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "modules", tuple(self.modules))

    def is_due(self, tick: int) -> bool:
        return tick % self.period_multiplier == 0


@dataclass(frozen=True)
class Firing:
    tick: int
    sequences: tuple[str, ...]


def check_sequences(sequences: SequenceType[Sequence]) -> None:
    """Reject bad multipliers, duplicate sequence names and modules assigned twice."""

    names: set[str] = set()
    owners: dict[str, list[str]] = {}
    for sequence in sequences:
        if not isinstance(sequence.period_multiplier, int) or sequence.period_multiplier < 1:
            raise ScheduleError(f"Sequence {sequence.name} needs an integer multiplier >= 1.")
        if sequence.name in names:
            raise ScheduleError(f"Duplicate sequence name: {sequence.name}")
        names.add(sequence.name)
        for module_id in sequence.modules:
            owners.setdefault(module_id, []).append(sequence.name)
    for module_id, owned_by in owners.items():
        if len(owned_by) > 1:
            raise DuplicateModuleAssignment(module_id, owned_by)


def iter_schedule(sequences: SequenceType[Sequence], n_ticks: int) -> Iterator[Firing]:
    for tick in range(n_ticks):
        due = tuple(sequence.name for sequence in sequences if sequence.is_due(tick))
        if due:
            yield Firing(tick, due)


def build_schedule(sequences: SequenceType[Sequence], n_ticks: int) -> list[Firing]:
    """Return the firing plan for ticks ``0..n_ticks-1``."""

    check_sequences(sequences)
    return list(iter_schedule(sequences, n_ticks))


@dataclass
class SlotSeries:
    ticks: list[int] = field(default_factory=list)
    times: list[int] = field(default_factory=list)
    values: list[SlotValue] = field(default_factory=list)

    def append(self, tick: int, t: int, value: SlotValue) -> None:
        self.ticks.append(tick)
        self.times.append(t)
        self.values.append(value)


@dataclass
class RunResults:
    series: dict[str, SlotSeries]
    ticks_run: int
    stopped_early: bool = False
    wall_time_s: float = 0.0
    module_time_s: dict[str, float] = field(default_factory=dict)

    def final_value(self, slot: str) -> SlotValue:
        series = self.series.get(slot)
        if series is None or not series.values:
            raise UnknownSlot(slot)
        return series.values[-1]

    def scalar_series(self, slot: str) -> TimeVector:
        """Return a scalar slot's recorded values as a TimeVector stamped at write time."""

        series = self.series.get(slot)
        if series is None or not series.values:
            raise UnknownSlot(slot)
        return TimeVector(tuple(series.times), tuple(float(value) for value in series.values))

    def write_probe_csvs(self, out_dir: str | Path, probes: Iterable[str]) -> list[Path]:
        out_dir = Path(out_dir)
        paths = []
        for slot in probes:
            paths.append(write_timevector_csv(self.scalar_series(slot), out_dir / f"{slot}.csv"))
        return paths


class CoSimulation:
    """Explicit multi-rate co-simulation master.

    Modules fire per the schedule in declared order and see every value already
    written in the same tick. With ``parallel=True`` consecutive modules whose
    inputs are not produced by anything firing in the same tick are stepped on a
    thread pool; their outputs are still written in declared order.
    """

    def __init__(
        self,
        origin: int,
        base_period: int,
        sequences: SequenceType[Sequence],
        modules: Iterable[SimModule],
        params: Mapping[str, Mapping[str, Any]] | None = None,
        record: Iterable[str] | None = None,
        parallel: bool = False,
        max_workers: int | None = None,
    ):
        self.grid = TimeGrid(origin, base_period)
        self.sequences = tuple(sequences)
        check_sequences(self.sequences)
        self.modules: dict[str, SimModule] = {}
        for module in modules:
            if module.module_id in self.modules:
                raise ScheduleError(f"Duplicate module id: {module.module_id}")
            self.modules[module.module_id] = module
        assigned = {module_id for sequence in self.sequences for module_id in sequence.modules}
        missing = sorted(assigned - set(self.modules))
        if missing:
            raise ScheduleError(f"Sequences reference unknown modules: {', '.join(missing)}")
        unassigned = sorted(set(self.modules) - assigned)
        if unassigned:
            raise ScheduleError(f"Modules not assigned to any sequence: {', '.join(unassigned)}")
        self.params = {key: dict(value) for key, value in (params or {}).items()}
        self.record = set(record) if record is not None else None
        self.parallel = parallel
        self.max_workers = max_workers
        self.zone = ExchangeZone()

    @property
    def base_period(self) -> int:
        return self.grid.base_period

    def _ordered_modules(self) -> list[SimModule]:
        return [self.modules[module_id] for sequence in self.sequences for module_id in sequence.modules]

    def _batches(self, firing: Firing) -> list[list[tuple[SimModule, int]]]:
        by_name = {sequence.name: sequence for sequence in self.sequences}
        due = [
            (self.modules[module_id], by_name[name].period_multiplier * self.base_period)
            for name in firing.sequences
            for module_id in by_name[name].modules
        ]
        if not self.parallel:
            return [[item] for item in due]
        produced: dict[str, str] = {}
        for module, _ in due:
            for slot in module.output_slots():
                produced[slot] = module.module_id
        batches: list[list[tuple[SimModule, int]]] = []
        current: list[tuple[SimModule, int]] = []
        for item in due:
            module = item[0]
            independent = all(produced.get(slot, module.module_id) == module.module_id for slot in module.input_slots())
            if independent:
                current.append(item)
                continue
            if current:
                batches.append(current)
                current = []
            batches.append([item])
        if current:
            batches.append(current)
        return batches

    def run(self, t_end: int) -> RunResults:
        n_ticks = self.grid.ticks_until(t_end)
        ordered = self._ordered_modules()
        series: dict[str, SlotSeries] = {}
        module_time = {module.module_id: 0.0 for module in ordered}
        started = time.perf_counter()
        logger.info(
            "co-simulation start: %d modules, %d sequences, %d ticks of %d s",
            len(ordered),
            len(self.sequences),
            n_ticks,
            self.base_period,
        )

        def record(tick: int, t: int, written: dict[str, SlotValue]) -> None:
            for slot, value in written.items():
                if self.record is not None and slot not in self.record:
                    continue
                series.setdefault(slot, SlotSeries()).append(tick, t, value)

        executor = ThreadPoolExecutor(max_workers=self.max_workers) if self.parallel else None
        ticks_run = 0
        stopped_early = False
        try:
            for module in ordered:
                initialize(module, self.grid.origin, self.params.get(module.module_id, {}), self.zone)
            for firing in iter_schedule(self.sequences, n_ticks):
                self.grid.tick = firing.tick
                t = self.grid.now
                for batch in self._batches(firing):
                    if len(batch) == 1 or executor is None:
                        for module, dt in batch:
                            record(firing.tick, t, self._fire(module, t, dt, firing.tick, module_time))
                    else:
                        for written in self._fire_batch(executor, batch, t, firing.tick, module_time):
                            record(firing.tick, t, written)
                ticks_run = firing.tick + 1
                if any(module.stop_requested for module in ordered):
                    stopped_early = True
                    logger.info("run stopped early at tick %d (t=%d)", firing.tick, t)
                    break
            else:
                ticks_run = n_ticks
        finally:
            if executor is not None:
                executor.shutdown(wait=True)
            for module in ordered:
                if module.state in (INITIALIZED, RUNNING):
                    terminate(module)
        wall = time.perf_counter() - started
        logger.info("co-simulation end: %d ticks in %.3f s", ticks_run, wall)
        return RunResults(series, ticks_run, stopped_early, wall, module_time)

    def _fire(self, module: SimModule, t: int, dt: int, tick: int, module_time: dict[str, float]) -> dict[str, SlotValue]:
        began = time.perf_counter()
        try:
            pre_step(module, t)
            outputs = compute_step(module, t, dt, read_inputs(module, t, self.zone))
            written = publish_outputs(module, outputs, self.zone, tick)
            post_step(module, t)
        except ModuleStepFailure:
            raise
        except Exception as error:
            raise ModuleStepFailure(tick, module.module_id, error) from error
        finally:
            module_time[module.module_id] += time.perf_counter() - began
        return written

    def _fire_batch(
        self,
        executor: ThreadPoolExecutor,
        batch: list[tuple[SimModule, int]],
        t: int,
        tick: int,
        module_time: dict[str, float],
    ) -> list[dict[str, SlotValue]]:
        inputs = {}
        for module, _ in batch:
            try:
                pre_step(module, t)
                inputs[module.module_id] = read_inputs(module, t, self.zone)
            except Exception as error:
                raise ModuleStepFailure(tick, module.module_id, error) from error

        def work(module: SimModule, dt: int) -> tuple[dict[str, SlotValue], float]:
            began = time.perf_counter()
            outputs = compute_step(module, t, dt, inputs[module.module_id])
            return outputs, time.perf_counter() - began

        futures = {executor.submit(work, module, dt): module for module, dt in batch}
        outputs_by_module = {}
        failures: dict[str, BaseException] = {}
        for future in as_completed(futures):
            module = futures[future]
            try:
                outputs_by_module[module.module_id], elapsed = future.result()
                module_time[module.module_id] += elapsed
            except Exception as error:
                failures[module.module_id] = error
        for module, _ in batch:
            # first failure in declared order, as a sequential run would report it
            if module.module_id in failures:
                error = failures[module.module_id]
                raise ModuleStepFailure(tick, module.module_id, error) from error
        written_all = []
        for module, _ in batch:
            try:
                written_all.append(publish_outputs(module, outputs_by_module[module.module_id], self.zone, tick))
                post_step(module, t)
            except Exception as error:
                raise ModuleStepFailure(tick, module.module_id, error) from error
        return written_all


@dataclass
class ConvergenceReport:
    multipliers: list[int]
    final_values: dict[str, list[float]]
    differences: dict[str, list[float]]
    errors: dict[str, list[float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "multipliers": self.multipliers,
            "final_values": self.final_values,
            "differences": self.differences,
            "errors": self.errors,
        }


def convergence_study(
    build_engine: Callable[[int], CoSimulation],
    multipliers: Iterable[int],
    probe_slots: Iterable[str],
    t_end: int,
    reference: Mapping[str, float] | None = None,
) -> ConvergenceReport:
    """Run one engine per coupling multiplier and compare the probes' final values.

    ``build_engine(k)`` must return a fresh engine whose sequence multipliers are
    scaled by ``k``. Differences are taken between successive entries of
    ``multipliers``; ``reference`` adds absolute errors against known values.
    """

    multipliers = [int(k) for k in multipliers]
    probes = list(probe_slots)
    finals: dict[str, list[float]] = {slot: [] for slot in probes}
    for k in multipliers:
        engine = build_engine(k)
        n_ticks = engine.grid.ticks_until(t_end)
        for sequence in engine.sequences:
            if n_ticks % sequence.period_multiplier:
                raise ScheduleError(
                    f"Sequence {sequence.name} (multiplier {sequence.period_multiplier}) "
                    f"does not divide the {n_ticks} ticks to t_end."
                )
        results = engine.run(t_end)
        for slot in probes:
            finals[slot].append(float(results.final_value(slot)))
        logger.info("convergence run with multiplier %d done", k)
    differences = {
        slot: [abs(b - a) for a, b in zip(values, values[1:])] for slot, values in finals.items()
    }
    errors = {}
    if reference:
        errors = {slot: [abs(value - reference[slot]) for value in finals[slot]] for slot in probes if slot in reference}
    return ConvergenceReport(multipliers, finals, differences, errors)
