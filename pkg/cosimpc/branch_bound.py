"""Branch and bound over the binary variables of a MilpProblem.

Nodes are kept lazily: a child is stored with its parent's LP bound and only
solved when selected. Until the first incumbent the search dives depth-first
(nearer child first); afterwards it always expands the open node with the
smallest bound, ties broken by creation order.

Every node first propagates the bounds of its branching decision through the
rows; a node whose bounds cannot hold is dropped without an LP. Children
inherit their parent's basis, and the most recent bases keep their inverses
so a child LP usually starts from a factorised, dual feasible basis. A
fix-and-propagate rounding of the LP solution runs at the root and then
periodically to find incumbents early.
"""

from __future__ import annotations

import heapq
import logging
import time
from collections import OrderedDict
from dataclasses import dataclass, fields
from typing import Any, Mapping

import numpy as np

from cosimpc.config import solver_defaults
from cosimpc.milp import MilpProblem, Var
from cosimpc.propagation import propagate, round_and_fix
from cosimpc.simplex import (
    INFEASIBLE,
    ITERATION_LIMIT,
    OPTIMAL,
    UNBOUNDED,
    LpData,
    LpSolution,
    WarmStart,
    solve_arrays,
)

logger = logging.getLogger(__name__)

GAP_LIMIT = "gap-limit"
NODE_LIMIT = "node-limit"
STATUSES = (OPTIMAL, INFEASIBLE, UNBOUNDED, GAP_LIMIT, NODE_LIMIT)

HEURISTIC_EVERY = 25
FACTOR_CACHE_SIZE = 8


@dataclass(frozen=True)
class MilpOptions:
    gap_tol: float = 1e-6
    rel_gap_tol: float = 0.0
    node_limit: int = 100_000
    time_limit: float = 60.0
    int_tol: float = 1e-6

    @classmethod
    def from_mapping(cls, options: Mapping[str, Any] | None = None) -> "MilpOptions":
        """Environment defaults overridden by ``options``; unknown keys are rejected."""

        merged = {**solver_defaults(), **{k: v for k, v in (options or {}).items() if v is not None}}
        known = {field.name for field in fields(cls)}
        unknown = sorted(set(merged) - known)
        if unknown:
            raise ValueError(f"Unknown solver options: {', '.join(unknown)}")
        return cls(**merged)


@dataclass
class MilpSolution:
    """Result of ``solve_milp``. Objective and bound are in the problem's own sense."""

    status: str
    x: np.ndarray | None
    objective: float
    best_bound: float
    nodes: int
    wall_time: float
    lp_iterations: int
    names: tuple[str, ...] = ()
    root_warm_start: WarmStart | None = None

    @property
    def has_incumbent(self) -> bool:
        return self.x is not None

    @property
    def values(self) -> dict[str, float]:
        if self.x is None:
            return {}
        return {name: float(value) for name, value in zip(self.names, self.x)}

    def value(self, var: Var | str) -> float:
        if self.x is None:
            raise ValueError(f"No solution values available (status {self.status}).")
        if isinstance(var, Var):
            return float(self.x[var.index])
        return self.values[var]

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "objective": self.objective,
            "best_bound": self.best_bound,
            "nodes": self.nodes,
            "wall_time": self.wall_time,
            "lp_iterations": self.lp_iterations,
        }


@dataclass
class _Node:
    bound: float
    lb: np.ndarray
    ub: np.ndarray
    warm: WarmStart | None
    depth: int
    branched: int | None = None
    parent: int = -1


class _FactorCache:
    """The most recent node bases together with their inverses, keyed by node number."""

    def __init__(self, size: int = FACTOR_CACHE_SIZE):
        self.size = size
        self.entries: OrderedDict[int, WarmStart] = OrderedDict()

    def put(self, key: int, warm: WarmStart | None) -> None:
        if warm is None or warm.binv is None:
            return
        self.entries[key] = warm
        self.entries.move_to_end(key)
        while len(self.entries) > self.size:
            self.entries.popitem(last=False)

    def get(self, node: _Node) -> WarmStart | None:
        return self.entries.get(node.parent, node.warm)


def _branching_index(x: np.ndarray, binary: np.ndarray, int_tol: float) -> int | None:
    """Most fractional binary, lowest index on ties."""

    if not binary.any():
        return None
    indices = np.flatnonzero(binary)
    frac = x[indices] - np.floor(x[indices])
    score = np.minimum(frac, 1.0 - frac)
    best = int(np.argmax(score))
    if score[best] <= int_tol:
        return None
    return int(indices[best])


def _rounded_point(
    data: LpData,
    lb: np.ndarray,
    ub: np.ndarray,
    lp: LpSolution,
    int_tol: float,
) -> tuple[np.ndarray, float, int] | None:
    """Run the rounding heuristic from a node's LP solution; returns (x, objective, LP iterations)."""

    fixed = round_and_fix(data, lb, ub, lp.x, int_tol)
    if fixed is None:
        return None
    rounded = solve_arrays(data, fixed[0], fixed[1], lp.warm_start)
    if rounded.status != OPTIMAL:
        return None
    x = rounded.x.copy()
    x[data.binary] = np.round(x[data.binary])
    return x, float(data.cost[: data.n] @ x + data.c0), rounded.iterations


def solve_milp(
    problem: MilpProblem,
    options: MilpOptions | Mapping[str, Any] | None = None,
    warm_start: WarmStart | None = None,
) -> MilpSolution:
    """Solve ``problem`` to optimality or until a limit stops the search.

    ``warm_start`` seeds the root LP, typically with the root basis of a
    previous problem of the same shape (``MilpSolution.root_warm_start``).
    """

    if not isinstance(options, MilpOptions):
        options = MilpOptions.from_mapping(options)
    started = time.perf_counter()
    data = LpData.from_problem(problem)
    names = tuple(var.name for var in problem.variables)
    binary = data.binary

    incumbent: np.ndarray | None = None
    incumbent_obj = np.inf
    pruned_floor = np.inf
    lp_iterations = 0
    nodes = 0
    incomplete = False
    stop_status: str | None = None
    root_warm: WarmStart | None = None
    factors = _FactorCache()

    open_nodes: list[tuple[float, int, _Node]] = []
    diving = True
    counter = 0

    def push(node: _Node) -> None:
        nonlocal counter
        counter += 1
        entry = (node.bound, counter, node)
        if diving:
            open_nodes.append(entry)
        else:
            heapq.heappush(open_nodes, entry)

    def accept(x: np.ndarray, objective: float, depth: int, source: str) -> None:
        nonlocal incumbent, incumbent_obj, diving
        incumbent = x
        incumbent_obj = objective
        logger.debug("node %d: new incumbent %.9g from %s at depth %d", nodes, objective, source, depth)
        if diving:
            diving = False
            heapq.heapify(open_nodes)

    push(_Node(-np.inf, data.lb.copy(), data.ub.copy(), warm_start, 0))
    while open_nodes:
        if nodes >= options.node_limit:
            stop_status = NODE_LIMIT
            break
        if time.perf_counter() - started > options.time_limit:
            stop_status = GAP_LIMIT
            break
        if not diving and options.rel_gap_tol > 0 and incumbent is not None:
            lower = open_nodes[0][0]
            if (incumbent_obj - lower) <= options.rel_gap_tol * max(1.0, abs(incumbent_obj)):
                stop_status = GAP_LIMIT
                break

        bound, _, node = open_nodes.pop() if diving else heapq.heappop(open_nodes)
        if bound >= incumbent_obj - options.gap_tol:
            pruned_floor = min(pruned_floor, bound)
            continue

        nodes += 1
        key = nodes
        lb, ub = node.lb.copy(), node.ub.copy()
        if not propagate(data, lb, ub, None if node.branched is None else [node.branched]):
            logger.debug("node %d infeasible by propagation at depth %d", key, node.depth)
            continue
        lp = solve_arrays(data, lb, ub, factors.get(node))
        lp_iterations += lp.iterations
        if key == 1 and lp.warm_start is not None:
            root_warm = lp.warm_start.without_factor()
        if lp.status == UNBOUNDED:
            if incumbent is None and key == 1:
                return MilpSolution(UNBOUNDED, None, -np.inf, -np.inf, nodes, time.perf_counter() - started, lp_iterations, names)
            incomplete = True
            continue
        if lp.status == ITERATION_LIMIT:
            logger.warning("LP at depth %d hit the iteration limit; node dropped", node.depth)
            incomplete = True
            continue
        if lp.status == INFEASIBLE:
            logger.debug("node %d infeasible at depth %d", key, node.depth)
            continue
        factors.put(key, lp.warm_start)
        node_bound = max(lp.objective, bound)
        if node_bound >= incumbent_obj - options.gap_tol:
            pruned_floor = min(pruned_floor, node_bound)
            continue

        j = _branching_index(lp.x, binary, options.int_tol)
        if j is None:
            x = lp.x.copy()
            x[binary] = np.round(x[binary])
            accept(x, float(data.cost[: data.n] @ x + data.c0), node.depth, "relaxation")
            continue

        if key == 1 or key % HEURISTIC_EVERY == 0:
            found = _rounded_point(data, lb, ub, lp, options.int_tol)
            if found is not None:
                lp_iterations += found[2]
                if found[1] < incumbent_obj - options.gap_tol:
                    accept(found[0], found[1], node.depth, "rounding")
                if node_bound >= incumbent_obj - options.gap_tol:
                    pruned_floor = min(pruned_floor, node_bound)
                    continue

        logger.debug("node %d: bound %.9g, branching on %s = %.6f", key, node_bound, names[j], lp.x[j])
        light = lp.warm_start.without_factor()
        down_ub = ub.copy()
        down_ub[j] = 0.0
        up_lb = lb.copy()
        up_lb[j] = 1.0
        down = _Node(node_bound, lb, down_ub, light, node.depth + 1, j, key)
        up = _Node(node_bound, up_lb, ub, light, node.depth + 1, j, key)
        # the child pushed last is explored first while diving
        if lp.x[j] >= 0.5:
            push(down)
            push(up)
        else:
            push(up)
            push(down)

    wall_time = time.perf_counter() - started
    open_floor = min((entry[0] for entry in open_nodes), default=np.inf)
    best_bound = min(incumbent_obj, pruned_floor, open_floor)
    if stop_status is None:
        if incumbent is None:
            status = NODE_LIMIT if incomplete else INFEASIBLE
        else:
            status = GAP_LIMIT if incomplete else OPTIMAL
    else:
        status = stop_status
    logger.info(
        "branch and bound %s: objective %.9g, bound %.9g, %d nodes, %.3f s",
        status,
        incumbent_obj,
        best_bound,
        nodes,
        wall_time,
    )
    return MilpSolution(
        status=status,
        x=incumbent,
        objective=problem.reported_objective(incumbent_obj),
        best_bound=problem.reported_objective(best_bound),
        nodes=nodes,
        wall_time=wall_time,
        lp_iterations=lp_iterations,
        names=names,
        root_warm_start=root_warm,
    )
