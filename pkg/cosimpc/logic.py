from __future__ import annotations

import heapq
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import pandas as pd

from cosimpc.blocks import Block, get_block_type
from cosimpc.errors import AlgebraicLoop, BlockParameterError, LogicModelError, NonFiniteSignal
from cosimpc.modules import PortSpec, SimModule

logger = logging.getLogger(__name__)

IDENT = r"[A-Za-z_][A-Za-z0-9_]*"
BLOCK_LINE = re.compile(rf"^block\s+({IDENT})\s+({IDENT})((?:\s+{IDENT}=\S+)*)\s*$")
WIRE_LINE = re.compile(rf"^({IDENT})\.({IDENT})\s*->\s*({IDENT})\.({IDENT})$")
INPUT_LINE = re.compile(rf"^input\s+({IDENT})\s*->\s*({IDENT})\.({IDENT})$")
OUTPUT_LINE = re.compile(rf"^output\s+({IDENT})\s*=\s*({IDENT})\.({IDENT})$")


@dataclass(frozen=True)
class BlockDecl:
    block_id: str
    type_name: str
    params: Mapping[str, str]
    line: int | None = None


@dataclass(frozen=True)
class Connection:
    src: str
    src_port: str
    dst: str
    dst_port: str


@dataclass
class LogicGraph:
    blocks: dict[str, BlockDecl] = field(default_factory=dict)
    connections: list[Connection] = field(default_factory=list)
    # external input name -> destination ports
    inputs: dict[str, list[tuple[str, str]]] = field(default_factory=dict)
    # external output name -> source port
    outputs: dict[str, tuple[str, str]] = field(default_factory=dict)

    def add_block(self, block_id: str, type_name: str, line: int | None = None, **params: Any) -> None:
        if block_id in self.blocks:
            raise LogicModelError(f"duplicate block id {block_id}", line)
        get_block_type(type_name)
        self.blocks[block_id] = BlockDecl(block_id, type_name, {k: str(v) for k, v in params.items()}, line)

    def connect(self, src: str, dst: str) -> None:
        """Connect ``"block.port"`` to ``"block.port"``."""

        src_block, src_port = src.split(".")
        dst_block, dst_port = dst.split(".")
        self.connections.append(Connection(src_block, src_port, dst_block, dst_port))

    def add_input(self, name: str, dst: str) -> None:
        block, port = dst.split(".")
        self.inputs.setdefault(name, []).append((block, port))

    def add_output(self, name: str, src: str) -> None:
        block, port = src.split(".")
        self.outputs[name] = (block, port)


def parse_logic(text: str) -> LogicGraph:
    """Parse the line-oriented logic model format."""

    graph = LogicGraph()
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if match := BLOCK_LINE.match(line):
            block_id, type_name, rest = match.groups()
            params = dict(item.split("=", 1) for item in rest.split())
            try:
                graph.add_block(block_id, type_name, number, **params)
            except BlockParameterError as error:
                raise LogicModelError(str(error), number) from error
        elif match := INPUT_LINE.match(line):
            name, block, port = match.groups()
            graph.inputs.setdefault(name, []).append((block, port))
        elif match := OUTPUT_LINE.match(line):
            name, block, port = match.groups()
            if name in graph.outputs:
                raise LogicModelError(f"duplicate output {name}", number)
            graph.outputs[name] = (block, port)
        elif match := WIRE_LINE.match(line):
            graph.connections.append(Connection(*match.groups()))
        else:
            raise LogicModelError(f"cannot parse {line!r}", number)
    return graph


def load_logic(path: str | Path) -> LogicGraph:
    return parse_logic(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class ExecutionPlan:
    order: tuple[str, ...]
    delays: frozenset[str]
    blocks: Mapping[str, Block]
    # (block, input port) -> ("block", src, port) or ("input", name, "")
    sources: Mapping[tuple[str, str], tuple[str, str, str]]
    outputs: Mapping[str, tuple[str, str]]
    input_names: tuple[str, ...]

    def new_states(self) -> dict[str, dict[str, Any]]:
        return {block_id: self.blocks[block_id].initial_state() for block_id in self.order}


@dataclass
class LogicStep:
    outputs: dict[str, float]
    signals: dict[str, float]


def _instantiate(graph: LogicGraph) -> dict[str, Block]:
    blocks = {}
    for block_id, decl in graph.blocks.items():
        try:
            blocks[block_id] = get_block_type(decl.type_name)(block_id, decl.params)
        except BlockParameterError as error:
            raise BlockParameterError(str(error), decl.line) from error
    return blocks


def _check_wiring(graph: LogicGraph, blocks: dict[str, Block]) -> dict[tuple[str, str], tuple[str, str, str]]:
    sources: dict[tuple[str, str], tuple[str, str, str]] = {}

    def claim(dst: str, port: str, source: tuple[str, str, str]) -> None:
        if dst not in blocks:
            raise LogicModelError(f"unknown block {dst}")
        if port not in blocks[dst].inputs:
            raise LogicModelError(f"block {dst} ({blocks[dst].type_name}) has no input port {port}")
        if (dst, port) in sources:
            raise LogicModelError(f"input {dst}.{port} has more than one incoming connection")
        sources[(dst, port)] = source

    for connection in graph.connections:
        if connection.src not in blocks:
            raise LogicModelError(f"unknown block {connection.src}")
        if connection.src_port not in blocks[connection.src].outputs:
            raise LogicModelError(f"block {connection.src} has no output port {connection.src_port}")
        claim(connection.dst, connection.dst_port, ("block", connection.src, connection.src_port))
    for name, destinations in graph.inputs.items():
        for dst, port in destinations:
            claim(dst, port, ("input", name, ""))
    for name, (src, port) in graph.outputs.items():
        if src not in blocks or port not in blocks[src].outputs:
            raise LogicModelError(f"output {name} refers to unknown port {src}.{port}")
    return sources


def _cycle_blocks(nodes: set[str], successors: dict[str, set[str]]) -> list[str]:
    """Return the blocks of one strongly connected component that contains a cycle."""

    index: dict[str, int] = {}
    lowlink: dict[str, int] = {}
    stack: list[str] = []
    on_stack: set[str] = set()
    components: list[list[str]] = []
    counter = 0

    def strongconnect(node: str) -> None:
        nonlocal counter
        index[node] = lowlink[node] = counter
        counter += 1
        stack.append(node)
        on_stack.add(node)
        for succ in sorted(successors.get(node, ())):
            if succ not in nodes:
                continue
            if succ not in index:
                strongconnect(succ)
                lowlink[node] = min(lowlink[node], lowlink[succ])
            elif succ in on_stack:
                lowlink[node] = min(lowlink[node], index[succ])
        if lowlink[node] == index[node]:
            component = []
            while True:
                member = stack.pop()
                on_stack.discard(member)
                component.append(member)
                if member == node:
                    break
            components.append(component)

    for node in sorted(nodes):
        if node not in index:
            strongconnect(node)
    for component in components:
        if len(component) > 1 or component[0] in successors.get(component[0], ()):
            return sorted(component)
    return sorted(nodes)


def compile_logic(graph: LogicGraph) -> ExecutionPlan:
    """Order the blocks so every non-delay block runs after the producers of its inputs.

    Arcs leaving delay blocks are cut; what remains must be acyclic. Ties are
    broken by ascending block id.
    """

    blocks = _instantiate(graph)
    sources = _check_wiring(graph, blocks)
    delays = frozenset(block_id for block_id, block in blocks.items() if block.is_delay)
    successors: dict[str, set[str]] = {block_id: set() for block_id in blocks}
    indegree = {block_id: 0 for block_id in blocks}
    for (dst, _), (kind, src, _) in sources.items():
        if kind != "block" or src in delays or dst in successors[src]:
            continue
        successors[src].add(dst)
        indegree[dst] += 1

    ready = [block_id for block_id, degree in indegree.items() if degree == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        block_id = heapq.heappop(ready)
        order.append(block_id)
        for succ in successors[block_id]:
            indegree[succ] -= 1
            if indegree[succ] == 0:
                heapq.heappush(ready, succ)
    if len(order) != len(blocks):
        remaining = set(blocks) - set(order)
        raise AlgebraicLoop(_cycle_blocks(remaining, successors))
    logger.debug("compiled logic model: %s", " ".join(order))
    return ExecutionPlan(
        order=tuple(order),
        delays=delays,
        blocks=blocks,
        sources=sources,
        outputs=dict(graph.outputs),
        input_names=tuple(sorted(graph.inputs)),
    )


def step_logic(
    plan: ExecutionPlan,
    states: dict[str, dict[str, Any]],
    external: Mapping[str, float],
    t: float,
    dt: float,
) -> LogicStep:
    """Execute one step of a compiled plan and return every signal it produced."""

    if dt <= 0:
        raise ValueError("Logic step needs dt > 0.")
    signals: dict[str, float] = {}
    for block_id in plan.delays:
        for port, value in plan.blocks[block_id].held(states[block_id]).items():
            signals[f"{block_id}.{port}"] = value
    for block_id in plan.order:
        block = plan.blocks[block_id]
        inputs = {}
        for port in block.inputs:
            source = plan.sources.get((block_id, port))
            if source is None:
                inputs[port] = block.defaults[port]
            elif source[0] == "input":
                inputs[port] = float(external[source[1]]) if source[1] in external else block.defaults[port]
            else:
                inputs[port] = signals[f"{source[1]}.{source[2]}"]
        for port, value in block.update(states[block_id], inputs, dt).items():
            if not math.isfinite(value):
                raise NonFiniteSignal(block_id, port)
            signals[f"{block_id}.{port}"] = value
    outputs = {name: signals[f"{src}.{port}"] for name, (src, port) in plan.outputs.items()}
    return LogicStep(outputs, signals)


class LogicModule(SimModule):
    """Runs a compiled logic model inside the co-simulation.

    External inputs become scalar input ports, external outputs become output
    ports. With ``trace`` every block output is kept for each step.
    """

    def __init__(self, module_id: str, wiring: Mapping[str, str] | None = None, plan: ExecutionPlan | None = None):
        super().__init__(module_id, wiring)
        self.plan = plan
        self.trace_rows: list[dict[str, float]] = []
        if plan is not None:
            self._declare_ports(plan)

    def _declare_ports(self, plan: ExecutionPlan) -> None:
        self.inputs = tuple(PortSpec(name, default=0.0) for name in plan.input_names)
        self.outputs = tuple(PortSpec(name) for name in plan.outputs)

    def setup(self, t0: int, params: Mapping[str, Any]) -> dict:
        if self.plan is None:
            if "model" in params:
                graph = parse_logic(params["model"])
            elif "path" in params:
                graph = load_logic(params["path"])
            else:
                raise LogicModelError(f"logic module {self.module_id} has no model")
            self.plan = compile_logic(graph)
            self._declare_ports(self.plan)
        self.states = self.plan.new_states()
        self.trace = bool(params.get("trace", False))
        return {}

    def step(self, t: int, dt: int, inputs: dict) -> dict:
        result = step_logic(self.plan, self.states, inputs, t, dt)
        if self.trace:
            self.trace_rows.append({"time": t, **result.signals})
        return result.outputs

    def trace_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.trace_rows)
