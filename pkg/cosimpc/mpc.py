"""Rolling-horizon model predictive control.

Each iteration gathers the plant state and the forecasts, lets a registered
formulator build a fresh MilpProblem for the horizon, solves it and hands the
first control period of the plan to the plant as time-vectors. Forecasts are
then shifted by the control period and topped up with new samples.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np
import pandas as pd

from cosimpc.branch_bound import MilpOptions, MilpSolution, solve_milp
from cosimpc.config import LP_DUMP, app_data_path
from cosimpc.errors import AllPointsExpired, ForecastGap, InfeasibleProblem, InfeasibleWindow, InvalidHorizon
from cosimpc.lpfile import export_lp
from cosimpc.milp import MilpProblem, Var
from cosimpc.modules import PortSpec, SimModule
from cosimpc.simplex import INFEASIBLE, WarmStart
from cosimpc.timebase import TimeVector, tv_overlay, tv_sample, tv_sample_cyclic, tv_shift

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Horizon:
    """Control period, horizon length and step, all in seconds."""

    control_period: int
    length: int
    step: int

    def __post_init__(self):
        if min(self.control_period, self.length, self.step) <= 0:
            raise InvalidHorizon("Horizon durations must be positive.")
        if self.length % self.step or self.control_period % self.step:
            raise InvalidHorizon(
                f"Control period {self.control_period} s and horizon {self.length} s must be multiples of the step {self.step} s."
            )
        if self.control_period > self.length:
            raise InvalidHorizon("Control period cannot exceed the horizon.")

    @classmethod
    def hours(cls, control_period: float, length: float, step: float) -> "Horizon":
        return cls(int(round(control_period * 3600)), int(round(length * 3600)), int(round(step * 3600)))

    @property
    def n_steps(self) -> int:
        return self.length // self.step

    @property
    def n_applied(self) -> int:
        return self.control_period // self.step

    @property
    def step_hours(self) -> float:
        return self.step / 3600.0

    def step_times(self, t_now: int) -> list[int]:
        return [t_now + i * self.step for i in range(self.n_steps)]


@dataclass(frozen=True)
class ForecastSet:
    series: Mapping[str, TimeVector]

    def __getitem__(self, name: str) -> TimeVector:
        try:
            return self.series[name]
        except KeyError:
            raise ForecastGap(name, -1) from None

    def check(self, names, t_now: int, horizon: Horizon) -> None:
        """Raise ForecastGap unless every named series has a sample at each step start."""

        for name in names:
            tv = self.series.get(name)
            if tv is None:
                raise ForecastGap(name, t_now)
            for t in horizon.step_times(t_now):
                if tv.value_at(t) is None:
                    raise ForecastGap(name, t)

    def values(self, name: str, t_now: int, horizon: Horizon) -> np.ndarray:
        tv = self[name]
        out = np.empty(horizon.n_steps)
        for i, t in enumerate(horizon.step_times(t_now)):
            value = tv.value_at(t)
            if value is None:
                raise ForecastGap(name, t)
            out[i] = value
        return out


def receding_update(
    previous: ForecastSet,
    new_data: Mapping[str, TimeVector | None],
    dt: int,
    t_now: int | None = None,
    horizon: Horizon | None = None,
) -> ForecastSet:
    """Shift every forecast by ``dt`` and overlay freshly received samples.

    With ``t_now`` and ``horizon`` the result is checked for coverage.
    """

    if dt <= 0:
        raise ValueError("Receding update needs dt > 0.")
    series = {}
    for name in sorted(set(previous.series) | set(new_data)):
        kept = None
        if name in previous.series:
            try:
                kept = tv_shift(previous.series[name], dt)
            except AllPointsExpired:
                kept = None
        update = new_data.get(name)
        if kept is None and update is None:
            missing = previous.series[name].first + dt if name in previous.series else (t_now or 0)
            raise ForecastGap(name, missing)
        series[name] = tv_overlay(kept, update)
    updated = ForecastSet(series)
    if horizon is not None and t_now is not None:
        updated.check(series, t_now, horizon)
    return updated


class ForecastFeed:
    """Perfect-knowledge forecast provider built on full data series.

    ``wrap`` plays a series cyclically past its end, so a one-year profile
    also covers the horizon of the last days of the year.
    """

    def __init__(self, sources: Mapping[str, TimeVector], wrap: bool = True):
        self.sources = dict(sources)
        self.wrap = wrap

    def chunk(self, name: str, start: int, stop: int, step: int) -> TimeVector | None:
        tv = self.sources[name]
        times, values = [], []
        for t in range(start, stop, step):
            if self.wrap:
                value = tv_sample_cyclic(tv, t)
            elif tv.first <= t <= tv.last:
                value = tv_sample(tv, t)
            else:
                break
            times.append(t)
            values.append(value)
        if not times:
            return None
        return TimeVector(tuple(times), tuple(values), tv.unit)

    def initial(self, t_now: int, horizon: Horizon) -> ForecastSet:
        stop = t_now + horizon.length
        series = {}
        for name in self.sources:
            chunk = self.chunk(name, t_now, stop, horizon.step)
            if chunk is None:
                raise ForecastGap(name, t_now)
            series[name] = chunk
        forecasts = ForecastSet(series)
        forecasts.check(series, t_now, horizon)
        return forecasts

    def advance(self, previous: ForecastSet, t_now: int, horizon: Horizon, dt: int) -> ForecastSet:
        """Shift ``previous`` by ``dt`` and append the samples that came into view."""

        new_data = {}
        for name, tv in previous.series.items():
            new_data[name] = self.chunk(name, tv.last + horizon.step, t_now + horizon.length, horizon.step)
        return receding_update(previous, new_data, dt, t_now, horizon)


@dataclass
class Formulation:
    """A window problem plus the per-step variables that become control trajectories.

    A control entry may be a plain number for steps the problem does not model.
    """

    problem: MilpProblem
    controls: Mapping[str, list[Var | float]]
    info: dict[str, Any] = field(default_factory=dict)


FormulatorFn = Callable[[Mapping[str, float], ForecastSet, int, Horizon, Mapping[str, Any]], Formulation]


@dataclass(frozen=True)
class Formulator:
    name: str
    build: FormulatorFn
    forecasts: tuple[str, ...]
    state: Mapping[str, float]
    controls: tuple[str, ...]


FORMULATORS: dict[str, Formulator] = {}


def register_formulator(
    name: str,
    forecasts: tuple[str, ...],
    state: Mapping[str, float],
    controls: tuple[str, ...],
):
    """Register a window formulator under ``name``.

    ``state`` maps the state inputs the formulator reads to their defaults.
    """

    def decorator(fn: FormulatorFn) -> FormulatorFn:
        FORMULATORS[name] = Formulator(name, fn, tuple(forecasts), dict(state), tuple(controls))
        return fn

    return decorator


def get_formulator(name: str) -> Formulator:
    try:
        return FORMULATORS[name]
    except KeyError:
        raise ValueError(f"Unsupported formulator: {name}") from None


@dataclass(frozen=True)
class ControlTrajectory:
    start: int
    step: int
    n_applied: int
    planned: Mapping[str, tuple[float, ...]]

    def planned_vector(self, name: str) -> TimeVector:
        return TimeVector.regular(self.start, self.step, self.planned[name])

    @property
    def end(self) -> int:
        return self.start + self.n_applied * self.step

    def applied(self, name: str) -> TimeVector:
        """The first control period of the plan, closed by its last value held at ``end``."""

        prefix = self.planned[name][: self.n_applied]
        return TimeVector.regular(self.start, self.step, prefix + prefix[-1:])

    def applied_all(self) -> dict[str, TimeVector]:
        return {name: self.applied(name) for name in self.planned}


@dataclass
class MpcIteration:
    t: int
    trajectory: ControlTrajectory
    solution: MilpSolution
    formulation: Formulation
    formulate_s: float
    solve_s: float


def extract_trajectory(formulation: Formulation, solution: MilpSolution, t_now: int, horizon: Horizon) -> ControlTrajectory:
    planned = {}
    for name, variables in formulation.controls.items():
        values = []
        for var in variables:
            if not isinstance(var, Var):
                values.append(float(var))
                continue
            value = min(max(solution.value(var), var.lb), var.ub)
            values.append(float(round(value)) if var.is_binary else value)
        planned[name] = tuple(values)
    return ControlTrajectory(t_now, horizon.step, horizon.n_applied, planned)


def mpc_iterate(
    t_now: int,
    state: Mapping[str, float],
    forecasts: ForecastSet,
    formulator: Formulator | str,
    horizon: Horizon,
    params: Mapping[str, Any] | None = None,
    options: MilpOptions | Mapping[str, Any] | None = None,
    lp_dump_dir: str | Path | None = None,
    warm_start: WarmStart | None = None,
) -> MpcIteration:
    """Formulate, solve and extract one MPC window starting at ``t_now``.

    ``warm_start`` is the root basis of the previous window; windows built by
    the same formulator share their shape, so it usually fits.
    """

    if isinstance(formulator, str):
        formulator = get_formulator(formulator)
    forecasts.check(formulator.forecasts, t_now, horizon)
    began = time.perf_counter()
    formulation = formulator.build(state, forecasts, t_now, horizon, params or {})
    formulated = time.perf_counter()
    solution = solve_milp(formulation.problem, options, warm_start)
    solved = time.perf_counter()
    if not solution.has_incumbent:
        lp_path = None
        if lp_dump_dir is not None:
            lp_path = str(export_lp(formulation.problem, Path(lp_dump_dir) / f"{formulator.name}_{t_now}.lp"))
        error = InfeasibleWindow if solution.status == INFEASIBLE else InfeasibleProblem
        raise error(solution.status, lp_path)
    trajectory = extract_trajectory(formulation, solution, t_now, horizon)
    return MpcIteration(t_now, trajectory, solution, formulation, formulated - began, solved - formulated)


class MpcModule(SimModule):
    """Runs ``mpc_iterate`` every control period and publishes the applied plan.

    Parameters: ``formulator`` (registered name), ``horizon`` (Horizon),
    ``forecasts`` (name -> TimeVector data), ``wrap``, ``plant`` (formulator
    parameters), ``solver`` (MilpOptions mapping) and ``lp_dump_dir``.
    """

    def __init__(self, module_id: str, wiring: Mapping[str, str] | None = None, formulator: str | None = None):
        super().__init__(module_id, wiring)
        self.formulator = get_formulator(formulator) if formulator else None
        self.diagnostics: list[dict[str, Any]] = []
        self.iterations: list[MpcIteration] = []
        if self.formulator is not None:
            self._declare_ports(self.formulator)

    def _declare_ports(self, formulator: Formulator) -> None:
        self.inputs = tuple(PortSpec(name, default=float(default)) for name, default in formulator.state.items())
        self.outputs = tuple(PortSpec(name, kind="time-vector") for name in formulator.controls)

    def setup(self, t0: int, params: Mapping[str, Any]) -> dict:
        if self.formulator is None:
            self.formulator = get_formulator(params["formulator"])
            self._declare_ports(self.formulator)
        horizon = params["horizon"]
        self.horizon = horizon if isinstance(horizon, Horizon) else Horizon(**horizon)
        self.plant_params = dict(params.get("plant", {}))
        self.options = MilpOptions.from_mapping(params.get("solver"))
        self.feed = ForecastFeed(params.get("forecasts", {}), wrap=bool(params.get("wrap", True)))
        dump = params.get("lp_dump_dir")
        self.lp_dump_dir = dump if dump is not None else (app_data_path("lp") if LP_DUMP else None)
        self.keep_iterations = bool(params.get("keep_iterations", False))
        self.forecasts: ForecastSet | None = None
        self.last_t: int | None = None
        self.root_basis: WarmStart | None = None
        return {}

    def validate_step(self, t: int, dt: int) -> None:
        if dt != self.horizon.control_period:
            raise InvalidHorizon(
                f"MPC module {self.module_id} is stepped every {dt} s but its control period is {self.horizon.control_period} s."
            )

    def step(self, t: int, dt: int, inputs: dict) -> dict:
        if self.forecasts is None:
            self.forecasts = self.feed.initial(t, self.horizon)
        else:
            self.forecasts = self.feed.advance(self.forecasts, t, self.horizon, t - self.last_t)
        self.last_t = t
        iteration = mpc_iterate(
            t,
            inputs,
            self.forecasts,
            self.formulator,
            self.horizon,
            self.plant_params,
            self.options,
            self.lp_dump_dir,
            self.root_basis,
        )
        solution = iteration.solution
        self.root_basis = solution.root_warm_start
        size = iteration.formulation.problem.size_summary()
        self.diagnostics.append(
            {
                "iteration": len(self.diagnostics),
                "time": t,
                "status": solution.status,
                "objective": solution.objective,
                "best_bound": solution.best_bound,
                "nodes": solution.nodes,
                "lp_iterations": solution.lp_iterations,
                "formulate_s": iteration.formulate_s,
                "solve_s": iteration.solve_s,
                "variables": size["variables"],
                "binaries": size["binary"],
                "constraints": size["constraints"],
            }
        )
        if self.keep_iterations:
            self.iterations.append(iteration)
        logger.info(
            "mpc %s t=%d: %s objective %.6g, %d nodes, %.3f s",
            self.module_id,
            t,
            solution.status,
            solution.objective,
            solution.nodes,
            iteration.formulate_s + iteration.solve_s,
        )
        return iteration.trajectory.applied_all()

    def diagnostics_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.diagnostics)
