"""Block library for rule-based control models.

Every block is a small class holding validated, immutable parameters. Mutable
state lives in a plain dict created by ``initial_state`` so a compiled plan can
be shared between controller instances. Logical signals are floats: a value
``>= 0.5`` is true, and logical outputs are exactly 0.0 or 1.0.
"""

from __future__ import annotations

import math
import operator
from typing import Any, Callable, ClassVar, Mapping

from cosimpc.errors import BlockParameterError

TRUE_LEVEL = 0.5

COMPARISONS: dict[str, Callable[[float, float], bool]] = {
    "gt": operator.gt,
    "ge": operator.ge,
    "lt": operator.lt,
    "le": operator.le,
    "eq": operator.eq,
}


def is_true(value: float) -> bool:
    return value >= TRUE_LEVEL


def as_logic(flag: bool) -> float:
    return 1.0 if flag else 0.0


class Block:
    """Base block: declared ports, parameter schema and update equation."""

    type_name: ClassVar[str] = ""
    inputs: ClassVar[tuple[str, ...]] = ()
    outputs: ClassVar[tuple[str, ...]] = ("y",)
    input_defaults: ClassVar[dict[str, float]] = {}
    # parameter name -> default; None marks a required parameter
    parameters: ClassVar[dict[str, Any]] = {}
    is_delay: ClassVar[bool] = False

    def __init__(self, block_id: str, params: Mapping[str, Any] | None = None):
        self.block_id = block_id
        params = dict(params or {})
        unknown = sorted(set(params) - set(self.parameters) - set(self.inputs))
        if unknown:
            raise BlockParameterError(f"{self.type_name} block {block_id}: unknown parameters {', '.join(unknown)}")
        self.params: dict[str, Any] = {}
        for name, default in self.parameters.items():
            if name not in params and default is None:
                raise BlockParameterError(f"{self.type_name} block {block_id}: missing parameter {name}")
            self.params[name] = params.get(name, default)
        self.defaults = dict(self.input_defaults)
        for name in self.inputs:
            if name in params:
                self.defaults[name] = self._number(name, params[name])
        self.validate()

    def _number(self, name: str, value: Any) -> float:
        try:
            number = float(value)
        except (TypeError, ValueError):
            raise BlockParameterError(f"{self.type_name} block {self.block_id}: {name} must be a number") from None
        if math.isnan(number):
            raise BlockParameterError(f"{self.type_name} block {self.block_id}: {name} is NaN")
        return number

    def number(self, name: str) -> float:
        return self._number(name, self.params[name])

    def validate(self) -> None:
        pass

    def initial_state(self) -> dict[str, Any]:
        return {}

    def update(self, state: dict[str, Any], inputs: dict[str, float], dt: float) -> dict[str, float]:
        raise NotImplementedError


class Constant(Block):
    type_name = "constant"
    parameters = {"value": 0.0}

    def update(self, state, inputs, dt):
        return {"y": self.number("value")}


class GainBlock(Block):
    type_name = "gain"
    inputs = ("u",)
    input_defaults = {"u": 0.0}
    parameters = {"k": 1.0}

    def update(self, state, inputs, dt):
        return {"y": self.number("k") * inputs["u"]}


class Sum(Block):
    """y = ka*a + kb*b + kc*c"""

    type_name = "sum"
    inputs = ("a", "b", "c")
    input_defaults = {"a": 0.0, "b": 0.0, "c": 0.0}
    parameters = {"ka": 1.0, "kb": 1.0, "kc": 1.0}

    def update(self, state, inputs, dt):
        return {"y": self.number("ka") * inputs["a"] + self.number("kb") * inputs["b"] + self.number("kc") * inputs["c"]}


class Product(Block):
    type_name = "product"
    inputs = ("a", "b")
    input_defaults = {"a": 1.0, "b": 1.0}

    def update(self, state, inputs, dt):
        return {"y": inputs["a"] * inputs["b"]}


class Minimum(Block):
    type_name = "min"
    inputs = ("a", "b")
    input_defaults = {"a": math.inf, "b": math.inf}

    def update(self, state, inputs, dt):
        return {"y": min(inputs["a"], inputs["b"])}


class Maximum(Block):
    type_name = "max"
    inputs = ("a", "b")
    input_defaults = {"a": -math.inf, "b": -math.inf}

    def update(self, state, inputs, dt):
        return {"y": max(inputs["a"], inputs["b"])}


class Comparator(Block):
    type_name = "comparator"
    inputs = ("a", "b")
    input_defaults = {"a": 0.0, "b": 0.0}
    parameters = {"op": "ge"}

    def validate(self):
        if self.params["op"] not in COMPARISONS:
            raise BlockParameterError(f"comparator block {self.block_id}: unknown op {self.params['op']}")

    def update(self, state, inputs, dt):
        return {"y": as_logic(COMPARISONS[self.params["op"]](inputs["a"], inputs["b"]))}


class Switch(Block):
    """y = a when cond is true, else b."""

    type_name = "switch"
    inputs = ("cond", "a", "b")
    input_defaults = {"cond": 0.0, "a": 0.0, "b": 0.0}

    def update(self, state, inputs, dt):
        return {"y": inputs["a"] if is_true(inputs["cond"]) else inputs["b"]}


class Hysteresis(Block):
    """Relay: on once u >= on, off once u <= off, otherwise hold."""

    type_name = "hysteresis"
    inputs = ("u",)
    input_defaults = {"u": 0.0}
    parameters = {"on": None, "off": None, "init": 0.0}

    def validate(self):
        if self.number("off") > self.number("on"):
            raise BlockParameterError(f"hysteresis block {self.block_id}: off threshold above on threshold")

    def initial_state(self):
        return {"y": as_logic(is_true(self.number("init")))}

    def update(self, state, inputs, dt):
        if inputs["u"] >= self.number("on"):
            state["y"] = 1.0
        elif inputs["u"] <= self.number("off"):
            state["y"] = 0.0
        return {"y": state["y"]}


class Saturation(Block):
    type_name = "saturation"
    inputs = ("u",)
    input_defaults = {"u": 0.0}
    parameters = {"lo": None, "hi": None}

    def validate(self):
        if self.number("lo") > self.number("hi"):
            raise BlockParameterError(f"saturation block {self.block_id}: lo above hi")

    def update(self, state, inputs, dt):
        return {"y": min(max(inputs["u"], self.number("lo")), self.number("hi"))}


class Filter(Block):
    """First-order lag, implicit Euler: y_k = (y_{k-1} + (dt/tau) u_k) / (1 + dt/tau)."""

    type_name = "filter"
    inputs = ("u",)
    input_defaults = {"u": 0.0}
    parameters = {"tau": None, "init": 0.0}

    def validate(self):
        if not self.number("tau") > 0:
            raise BlockParameterError(f"filter block {self.block_id}: tau must be > 0")

    def initial_state(self):
        return {"y": self.number("init")}

    def update(self, state, inputs, dt):
        ratio = dt / self.number("tau")
        state["y"] = (state["y"] + ratio * inputs["u"]) / (1.0 + ratio)
        return {"y": state["y"]}


class Delay(Block):
    """Unit delay. Emits the previous step's input; the engine reads ``held`` before the step."""

    type_name = "delay"
    inputs = ("u",)
    input_defaults = {"u": 0.0}
    parameters = {"init": 0.0}
    is_delay = True

    def initial_state(self):
        return {"held": self.number("init")}

    def held(self, state) -> dict[str, float]:
        return {"y": state["held"]}

    def update(self, state, inputs, dt):
        emitted = state["held"]
        state["held"] = inputs["u"]
        return {"y": emitted}


class And(Block):
    type_name = "and"
    inputs = ("a", "b")
    input_defaults = {"a": 1.0, "b": 1.0}

    def update(self, state, inputs, dt):
        return {"y": as_logic(is_true(inputs["a"]) and is_true(inputs["b"]))}


class Or(Block):
    type_name = "or"
    inputs = ("a", "b")
    input_defaults = {"a": 0.0, "b": 0.0}

    def update(self, state, inputs, dt):
        return {"y": as_logic(is_true(inputs["a"]) or is_true(inputs["b"]))}


class Not(Block):
    type_name = "not"
    inputs = ("u",)
    input_defaults = {"u": 0.0}

    def update(self, state, inputs, dt):
        return {"y": as_logic(not is_true(inputs["u"]))}


class OnDelay(Block):
    """True once u has been true for at least ``delay`` seconds, counting the current step."""

    type_name = "ondelay"
    inputs = ("u",)
    input_defaults = {"u": 0.0}
    parameters = {"delay": None}

    def validate(self):
        if self.number("delay") < 0:
            raise BlockParameterError(f"ondelay block {self.block_id}: delay must be >= 0")

    def initial_state(self):
        return {"elapsed": 0.0}

    def update(self, state, inputs, dt):
        if is_true(inputs["u"]):
            state["elapsed"] += dt
        else:
            state["elapsed"] = 0.0
        return {"y": as_logic(is_true(inputs["u"]) and state["elapsed"] >= self.number("delay"))}


class Latch(Block):
    """Set/reset latch; reset wins when both are true."""

    type_name = "latch"
    inputs = ("set", "reset")
    input_defaults = {"set": 0.0, "reset": 0.0}
    parameters = {"init": 0.0}

    def initial_state(self):
        return {"y": as_logic(is_true(self.number("init")))}

    def update(self, state, inputs, dt):
        if is_true(inputs["reset"]):
            state["y"] = 0.0
        elif is_true(inputs["set"]):
            state["y"] = 1.0
        return {"y": state["y"]}


class Since(Block):
    """Seconds elapsed since the last rising edge of u (``init`` before the first one)."""

    type_name = "since"
    inputs = ("u",)
    input_defaults = {"u": 0.0}
    parameters = {"init": 1e9}

    def initial_state(self):
        return {"elapsed": self.number("init"), "previous": None}

    def update(self, state, inputs, dt):
        now = is_true(inputs["u"])
        if state["previous"] is not None:
            if now and not state["previous"]:
                state["elapsed"] = 0.0
            else:
                state["elapsed"] += dt
        state["previous"] = now
        return {"y": state["elapsed"]}


class Pid(Block):
    """Positional discrete PID with output clamping and conditional-integration anti-windup.

    u_k = kp*e_k + ki*I_k + kd*(e_k - e_{k-1})/dt with I_k = I_{k-1} + e_k*dt,
    e = sp - pv. The integral is frozen on steps where the output saturates and
    the error would drive it further into the limit.
    """

    type_name = "pid"
    inputs = ("sp", "pv")
    input_defaults = {"sp": 0.0, "pv": 0.0}
    parameters = {"kp": 1.0, "ki": 0.0, "kd": 0.0, "umin": -math.inf, "umax": math.inf}

    def validate(self):
        if self.number("umin") > self.number("umax"):
            raise BlockParameterError(f"pid block {self.block_id}: umin above umax")

    def initial_state(self):
        return {"integral": 0.0, "error": 0.0}

    def update(self, state, inputs, dt):
        kp, ki, kd = self.number("kp"), self.number("ki"), self.number("kd")
        umin, umax = self.number("umin"), self.number("umax")
        error = inputs["sp"] - inputs["pv"]
        derivative = kd * (error - state["error"]) / dt if kd else 0.0
        integral = state["integral"] + error * dt
        raw = kp * error + ki * integral + derivative
        pushing = ki * error
        if (raw > umax and pushing > 0) or (raw < umin and pushing < 0):
            integral = state["integral"]
            raw = kp * error + ki * integral + derivative
        state["integral"] = integral
        state["error"] = error
        return {"y": min(max(raw, umin), umax)}


BLOCK_TYPES: dict[str, type[Block]] = {
    block.type_name: block
    for block in (
        Constant,
        GainBlock,
        Sum,
        Product,
        Minimum,
        Maximum,
        Comparator,
        Switch,
        Hysteresis,
        Saturation,
        Filter,
        Delay,
        And,
        Or,
        Not,
        OnDelay,
        Latch,
        Since,
        Pid,
    )
}


def get_block_type(type_name: str) -> type[Block]:
    try:
        return BLOCK_TYPES[type_name]
    except KeyError as error:
        raise BlockParameterError(f"Unsupported block type: {type_name}") from error


def make_block(block_id: str, type_name: str, params: Mapping[str, Any] | None = None) -> Block:
    return get_block_type(type_name)(block_id, params)
