from __future__ import annotations

import math
import operator
from typing import Any, Mapping

import numpy as np

from cosimpc.engine import CoSimulation, Sequence
from cosimpc.modules import PortSpec, SimModule
from cosimpc.timebase import TimeVector, tv_sample, tv_sample_cyclic

COMPARATORS = {
    "gt": operator.gt,
    "ge": operator.ge,
    "lt": operator.lt,
    "le": operator.le,
}


class ConstantSource(SimModule):
    outputs = (PortSpec("y"),)

    def setup(self, t0: int, params: Mapping[str, Any]) -> dict:
        self.value = float(params.get("value", 0.0))
        return {"y": self.value}

    def step(self, t: int, dt: int, inputs: dict) -> dict:
        return {"y": self.value}


class Gain(SimModule):
    inputs = (PortSpec("u", default=0.0),)
    outputs = (PortSpec("y"),)

    def setup(self, t0: int, params: Mapping[str, Any]) -> dict:
        self.k = float(params.get("k", 1.0))
        self.offset = float(params.get("offset", 0.0))
        return {"y": self.offset}

    def step(self, t: int, dt: int, inputs: dict) -> dict:
        return {"y": self.k * inputs["u"] + self.offset}


class Ramp(SimModule):
    """Outputs ``start + slope * n`` after its n-th step."""

    outputs = (PortSpec("y"),)

    def setup(self, t0: int, params: Mapping[str, Any]) -> dict:
        self.start = float(params.get("start", 0.0))
        self.slope = float(params.get("slope", 1.0))
        self.steps = 0
        return {"y": self.start}

    def step(self, t: int, dt: int, inputs: dict) -> dict:
        self.steps += 1
        return {"y": self.start + self.slope * self.steps}


class FirstOrderLag(SimModule):
    """dx/dt = (bias + gain * u - x) / tau, integrated exactly with u held over the step."""

    inputs = (PortSpec("u", default=0.0),)
    outputs = (PortSpec("x"),)

    def setup(self, t0: int, params: Mapping[str, Any]) -> dict:
        self.tau = float(params.get("tau", 1.0))
        if self.tau <= 0:
            raise ValueError("Lag time constant must be positive.")
        self.gain = float(params.get("gain", 1.0))
        self.bias = float(params.get("bias", 0.0))
        self.x = float(params.get("x0", 0.0))
        return {"x": self.x}

    def step(self, t: int, dt: int, inputs: dict) -> dict:
        target = self.bias + self.gain * inputs["u"]
        self.x = target + (self.x - target) * math.exp(-dt / self.tau)
        return {"x": self.x}


class SeriesSource(SimModule):
    """Plays a TimeVector into a scalar slot."""

    outputs = (PortSpec("y"),)

    def setup(self, t0: int, params: Mapping[str, Any]) -> dict:
        self.series: TimeVector = params["series"]
        self.mode = params.get("sample", "hold-last")
        self.wrap = bool(params.get("wrap", False))
        self.scale = float(params.get("scale", 1.0))
        return {"y": self.value_at(t0)}

    def value_at(self, t: int) -> float:
        if self.wrap:
            return self.scale * tv_sample_cyclic(self.series, t, self.mode)
        return self.scale * tv_sample(self.series, t, self.mode)

    def step(self, t: int, dt: int, inputs: dict) -> dict:
        return {"y": self.value_at(t)}


class StopWhen(SimModule):
    """Requests an orderly end of the run once ``u <op> threshold`` holds."""

    inputs = (PortSpec("u"),)
    outputs = (PortSpec("triggered"),)

    def setup(self, t0: int, params: Mapping[str, Any]) -> dict:
        op = params.get("op", "ge")
        if op not in COMPARATORS:
            raise ValueError(f"Unknown comparison: {op}")
        self.compare = COMPARATORS[op]
        self.threshold = float(params["threshold"])
        return {"triggered": 0.0}

    def step(self, t: int, dt: int, inputs: dict) -> dict:
        if self.compare(inputs["u"], self.threshold):
            self.stop_requested = True
        return {"triggered": 1.0 if self.stop_requested else 0.0}


def two_lag_matrix(tau1: float, tau2: float) -> tuple[np.ndarray, np.ndarray]:
    """Return (A, b) of the coupled lags x1' = (1 - x2 - x1)/tau1, x2' = (x1 - x2)/tau2."""

    a = np.array([[-1.0 / tau1, -1.0 / tau1], [1.0 / tau2, -1.0 / tau2]])
    b = np.array([1.0 / tau1, 0.0])
    return a, b


def two_lag_exact(t: float, tau1: float, tau2: float, x0: tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
    """Closed-form state of the coupled two-lag system at time ``t``."""

    a, b = two_lag_matrix(tau1, tau2)
    steady = np.linalg.solve(a, -b)
    eigenvalues, vectors = np.linalg.eig(a)
    coefficients = np.linalg.solve(vectors, np.asarray(x0, dtype=float) - steady)
    state = steady + vectors @ (np.exp(eigenvalues * t) * coefficients)
    return np.real(state)


def two_lag_cosimulation(
    multiplier: int = 1,
    tau1: float = 600.0,
    tau2: float = 900.0,
    base_period: int = 10,
    origin: int = 0,
) -> CoSimulation:
    """Coupled lags as two modules in one sequence stepped every ``multiplier`` ticks."""

    lag1 = FirstOrderLag("lag1", {"u": "lag2.x"})
    lag2 = FirstOrderLag("lag2", {"u": "lag1.x"})
    return CoSimulation(
        origin,
        base_period,
        [Sequence("plant", multiplier, ("lag1", "lag2"))],
        [lag1, lag2],
        params={
            "lag1": {"tau": tau1, "gain": -1.0, "bias": 1.0},
            "lag2": {"tau": tau2, "gain": 1.0, "bias": 0.0},
        },
        record=["lag1.x", "lag2.x"],
    )
