"""Bounded-variable simplex on dense numpy arrays.

The LP ``min c x  s.t.  row_lo <= A x <= row_hi,  lb <= x <= ub`` is solved
in the form ``[A | -I] z = 0`` where ``z = (x, r)`` and each row activity
``r_i`` carries the row bounds. The slack basis ``B = -I`` is always a valid
start. Phase 1 minimizes the sum of bound violations of the basic variables
(composite costs of +-1); phase 2 minimizes ``c x``. Pricing is Dantzig's
rule until pivots stall, after which Bland's rule is used for the rest of the
solve.

A warm start that is still dual feasible (the usual case after a bound
change in branch and bound) is first driven to primal feasibility by the
dual simplex; the primal then only confirms optimality. The basis inverse is
kept explicitly and updated in product form after every pivot. A warm start
may carry the inverse of its basis, so a child node starts without a fresh
factorisation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from cosimpc.milp import MilpProblem, ProblemArrays

logger = logging.getLogger(__name__)

FEAS_TOL = 1e-7
OPT_TOL = 1e-7
PIVOT_TOL = 1e-9
STALL_LIMIT = 50
REFACTOR_EVERY = 100
DRIFT_TOL = 1e-9

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration-limit"

AT_LOWER = -1
BASIC = 0
AT_UPPER = 1


@dataclass(frozen=True)
class WarmStart:
    """A basis with nonbasic positions, optionally with its current inverse."""

    basis: np.ndarray
    status: np.ndarray
    binv: np.ndarray | None = None
    updates: int = 0

    def fits(self, data: "LpData") -> bool:
        return len(self.basis) == data.m and len(self.status) == data.n + data.m

    def without_factor(self) -> "WarmStart":
        return WarmStart(self.basis, self.status)


@dataclass
class LpSolution:
    status: str
    x: np.ndarray | None
    objective: float
    iterations: int
    warm_start: WarmStart | None = None
    bland_used: bool = False
    dual_iterations: int = 0


@dataclass
class LpData:
    """Solver view of a problem: the full ``[A | -I]`` matrix plus costs and row bounds."""

    m: int
    n: int
    a: np.ndarray
    matrix: np.ndarray
    cost: np.ndarray
    c0: float
    row_lo: np.ndarray
    row_hi: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    binary: np.ndarray
    dropped_rows: int = 0
    empty_row_infeasible: bool = False

    @classmethod
    def from_arrays(cls, arrays: ProblemArrays) -> "LpData":
        a = arrays.a
        keep = np.any(a != 0.0, axis=1) if a.size else np.zeros(a.shape[0], dtype=bool)
        empty_lo = arrays.row_lo[~keep]
        empty_hi = arrays.row_hi[~keep]
        # an empty row is a constraint 0 in [lo, hi]
        empty_row_infeasible = bool(np.any(empty_lo > FEAS_TOL) or np.any(empty_hi < -FEAS_TOL))
        a = a[keep]
        m, n = a.shape[0], arrays.c.shape[0]
        matrix = np.hstack([a.reshape(m, n), -np.eye(m)])
        cost = np.concatenate([arrays.c, np.zeros(m)])
        return cls(
            m=m,
            n=n,
            a=a.reshape(m, n),
            matrix=matrix,
            cost=cost,
            c0=arrays.c0,
            row_lo=arrays.row_lo[keep],
            row_hi=arrays.row_hi[keep],
            lb=arrays.lb.copy(),
            ub=arrays.ub.copy(),
            binary=arrays.binary.copy(),
            dropped_rows=int((~keep).sum()),
            empty_row_infeasible=empty_row_infeasible,
        )

    @classmethod
    def from_problem(cls, problem: MilpProblem) -> "LpData":
        return cls.from_arrays(problem.arrays())


class _Simplex:
    def __init__(self, data: LpData, lb: np.ndarray, ub: np.ndarray, warm: WarmStart | None, max_iterations: int):
        self.data = data
        m, n = data.m, data.n
        self.lo = np.concatenate([lb, data.row_lo])
        self.hi = np.concatenate([ub, data.row_hi])
        self.max_iterations = max_iterations
        self.iterations = 0
        self.dual_iterations = 0
        self.bland = False
        self.stalled = 0
        self.since_refactor = 0
        self.z = np.zeros(n + m)
        if warm is not None:
            self.basis = warm.basis.copy()
            self.status = warm.status.copy()
        else:
            self.basis = np.arange(n, n + m)
            self.status = np.full(n + m, AT_LOWER)
            self.status[self.basis] = BASIC
        self._place_nonbasics()
        if warm is not None and warm.binv is not None and m:
            self.binv = warm.binv.copy()
            self.since_refactor = warm.updates
            self.compute_basics()
        else:
            self.refactor()

    def _place_nonbasics(self) -> None:
        nonbasic = self.status != BASIC
        at_upper = (self.status == AT_UPPER) & np.isfinite(self.hi)
        at_lower = nonbasic & ~at_upper
        # a nonbasic variable must sit on a finite bound
        swap = at_lower & ~np.isfinite(self.lo)
        at_upper |= swap
        at_lower &= ~swap
        self.status[at_upper] = AT_UPPER
        self.status[at_lower] = AT_LOWER
        self.z[at_upper] = self.hi[at_upper]
        self.z[at_lower] = self.lo[at_lower]

    def compute_basics(self) -> None:
        if self.data.m:
            nonbasic = self.status != BASIC
            rhs = self.data.matrix[:, nonbasic] @ self.z[nonbasic]
            self.z[self.basis] = -self.binv @ rhs

    def refactor(self) -> None:
        if self.data.m:
            self.binv = np.linalg.inv(self.data.matrix[:, self.basis])
        else:
            self.binv = np.zeros((0, 0))
        self.compute_basics()
        self.since_refactor = 0

    def drifted(self) -> bool:
        """True when the basics no longer solve ``[A | -I] z = 0`` to working accuracy."""

        if not self.data.m or not self.since_refactor:
            return False
        residual = np.abs(self.data.matrix @ self.z).max()
        return bool(residual > DRIFT_TOL * (1.0 + np.abs(self.z).max()))

    def infeasibility(self) -> np.ndarray:
        """Phase-1 costs of the basic variables: -1 below lower, +1 above upper."""

        values = self.z[self.basis]
        costs = np.zeros(self.data.m)
        costs[values < self.lo[self.basis] - FEAS_TOL] = -1.0
        costs[values > self.hi[self.basis] + FEAS_TOL] = 1.0
        return costs

    def reduced_costs(self, cost: np.ndarray) -> np.ndarray:
        reduced = cost.copy()
        if self.data.m:
            dual = cost[self.basis] @ self.binv
            reduced[: self.data.n] -= dual @ self.data.a
            reduced[self.data.n :] += dual
        reduced[self.basis] = 0.0
        return reduced

    def _movable(self) -> tuple[np.ndarray, np.ndarray]:
        movable = (self.status != BASIC) & (self.hi - self.lo > 0.0)
        return movable & (self.status == AT_LOWER), movable & (self.status == AT_UPPER)

    def dual_feasible(self) -> bool:
        reduced = self.reduced_costs(self.data.cost)
        at_lower, at_upper = self._movable()
        wrong = (at_lower & (reduced < -OPT_TOL)) | (at_upper & (reduced > OPT_TOL))
        return not bool(wrong.any())

    def choose_entering(self, reduced: np.ndarray) -> tuple[int, int] | None:
        at_lower, at_upper = self._movable()
        can_rise = at_lower & (reduced < -OPT_TOL)
        can_fall = at_upper & (reduced > OPT_TOL)
        eligible = np.flatnonzero(can_rise | can_fall)
        if eligible.size == 0:
            return None
        if self.bland:
            j = int(eligible[0])
        else:
            j = int(eligible[np.argmax(np.abs(reduced[eligible]))])
        return j, (1 if can_rise[j] else -1)

    def ratio_test(self, direction: np.ndarray, phase1: bool) -> tuple[float, int, int]:
        """Return (step, leaving basis position or -1, bound the leaver lands on)."""

        if direction.size == 0:
            return np.inf, -1, 0
        values = self.z[self.basis]
        lo = self.lo[self.basis]
        hi = self.hi[self.basis]
        moving = np.abs(direction) > PIVOT_TOL
        falling = moving & (direction < 0)
        rising = moving & (direction > 0)
        speed = np.where(moving, np.abs(direction), 1.0)
        steps = np.full(direction.shape, np.inf)
        sides = np.zeros(direction.shape, dtype=int)
        with np.errstate(invalid="ignore"):
            above = falling & (values > hi + FEAS_TOL) if phase1 else np.zeros_like(moving)
            below = rising & (values < lo - FEAS_TOL) if phase1 else np.zeros_like(moving)
            to_lower = falling & ~above & (values >= lo - FEAS_TOL) & np.isfinite(lo)
            to_upper = rising & ~below & (values <= hi + FEAS_TOL) & np.isfinite(hi)
            # phase 1 stops at the first breakpoint: an infeasible basic reaching its violated bound
            steps[above] = (values[above] - hi[above]) / speed[above]
            sides[above] = AT_UPPER
            steps[below] = (lo[below] - values[below]) / speed[below]
            sides[below] = AT_LOWER
            steps[to_lower] = np.maximum(values[to_lower] - lo[to_lower], 0.0) / speed[to_lower]
            sides[to_lower] = AT_LOWER
            steps[to_upper] = np.maximum(hi[to_upper] - values[to_upper], 0.0) / speed[to_upper]
            sides[to_upper] = AT_UPPER
        best = steps.min()
        if best == np.inf:
            return np.inf, -1, 0
        tied = np.flatnonzero(steps <= best + 1e-12)
        if self.bland:
            pos = int(tied[np.argmin(self.basis[tied])])
        else:
            pos = int(tied[np.argmax(speed[tied])])
        return float(steps[pos]), pos, int(sides[pos])

    def entering_column(self, j: int) -> np.ndarray:
        """Return B^-1 times column j of [A | -I]."""

        if not self.data.m:
            return np.zeros(0)
        if j < self.data.n:
            return self.binv @ self.data.a[:, j]
        return -self.binv[:, j - self.data.n]

    def pivot_row(self, pos: int) -> np.ndarray:
        """Row ``pos`` of B^-1 [A | -I]."""

        row = self.binv[pos]
        return np.concatenate([row @ self.data.a, -row])

    def pivot(self, j: int, pos: int, column: np.ndarray) -> None:
        pivot_row = self.binv[pos] / column[pos]
        self.binv -= np.outer(column, pivot_row)
        self.binv[pos] = pivot_row
        self.basis[pos] = j
        self.status[j] = BASIC
        self.since_refactor += 1
        if self.since_refactor >= REFACTOR_EVERY:
            logger.debug("refactorising basis after %d updates", self.since_refactor)
            self.refactor()

    def _note_progress(self, step: float) -> None:
        if step <= 1e-12:
            self.stalled += 1
            if self.stalled >= STALL_LIMIT and not self.bland:
                self.bland = True
                logger.debug("switching to Bland's rule after %d degenerate pivots", self.stalled)
        else:
            self.stalled = 0

    def run(self) -> str:
        data = self.data
        while True:
            if self.iterations >= self.max_iterations:
                return ITERATION_LIMIT
            phase_costs = self.infeasibility()
            phase1 = bool(np.any(phase_costs))
            if phase1:
                cost = np.zeros(data.n + data.m)
                cost[self.basis] = phase_costs
            else:
                cost = data.cost
            reduced = self.reduced_costs(cost)
            entering = self.choose_entering(reduced)
            if entering is None:
                return INFEASIBLE if phase1 else OPTIMAL
            j, sign = entering
            column = self.entering_column(j)
            # basics move by -sign * column per unit step of the entering variable
            direction = -sign * column
            step, pos, side = self.ratio_test(direction, phase1)
            flip = self.hi[j] - self.lo[j]
            self.iterations += 1
            if flip <= step:
                if not np.isfinite(flip):
                    return UNBOUNDED
                step = flip
                pos = -1
            if step == np.inf:
                return UNBOUNDED
            self._note_progress(step)
            if data.m:
                self.z[self.basis] += step * direction
            self.z[j] += sign * step
            if pos < 0:
                self.status[j] = AT_UPPER if sign > 0 else AT_LOWER
                self.z[j] = self.hi[j] if sign > 0 else self.lo[j]
                continue
            leaving = int(self.basis[pos])
            self.status[leaving] = side
            self.z[leaving] = self.hi[leaving] if side == AT_UPPER else self.lo[leaving]
            self.pivot(j, pos, column)

    def _row_proves_infeasible(self, pos: int, row: np.ndarray, rising: bool) -> bool:
        """Whether the box of the nonbasics keeps basic ``pos`` away from its violated bound."""

        nonbasic = (self.status != BASIC) & (row != 0.0)
        coef = -row[nonbasic]
        lo = self.lo[nonbasic]
        hi = self.hi[nonbasic]
        leaving = int(self.basis[pos])
        with np.errstate(invalid="ignore"):
            if rising:
                reach = float(np.where(coef > 0, coef * hi, coef * lo).sum())
                bound = self.lo[leaving]
                return reach < bound - 1e-6 * (1.0 + abs(bound))
            reach = float(np.where(coef > 0, coef * lo, coef * hi).sum())
            bound = self.hi[leaving]
            return reach > bound + 1e-6 * (1.0 + abs(bound))

    def run_dual(self) -> str:
        """Dual simplex from a dual feasible basis.

        Returns OPTIMAL once every basic is within its bounds, INFEASIBLE only
        when a row certifies it, and an empty string to hand over to the
        primal when no safe pivot is left.
        """

        data = self.data
        budget = self.dual_iterations + 2 * (data.n + data.m) + 100
        while True:
            if self.iterations >= self.max_iterations:
                return ITERATION_LIMIT
            if self.dual_iterations >= budget:
                return ""
            values = self.z[self.basis]
            below = self.lo[self.basis] - values
            above = values - self.hi[self.basis]
            violation = np.maximum(below, above)
            candidates = np.flatnonzero(violation > FEAS_TOL)
            if candidates.size == 0:
                return OPTIMAL
            if self.bland:
                pos = int(candidates[np.argmin(self.basis[candidates])])
            else:
                pos = int(candidates[np.argmax(violation[candidates])])
            rising = bool(below[pos] > FEAS_TOL)
            row = self.pivot_row(pos)
            # a unit move of nonbasic k changes basic pos by -row[k]; g > 0 means helpful when rising from lower
            g = -row if rising else row
            at_lower, at_upper = self._movable()
            eligible = np.flatnonzero((at_lower & (g > PIVOT_TOL)) | (at_upper & (g < -PIVOT_TOL)))
            if eligible.size == 0:
                return INFEASIBLE if self._row_proves_infeasible(pos, row, rising) else ""
            reduced = self.reduced_costs(data.cost)
            ratios = np.maximum(reduced[eligible] / g[eligible], 0.0)
            best = ratios.min()
            tied = eligible[ratios <= best + 1e-12]
            if self.bland:
                q = int(tied.min())
            else:
                q = int(tied[np.argmax(np.abs(g[tied]))])
            column = self.entering_column(q)
            if abs(column[pos]) <= PIVOT_TOL:
                self.refactor()
                return ""
            target = self.lo[self.basis[pos]] if rising else self.hi[self.basis[pos]]
            delta = -(target - values[pos]) / column[pos]
            self.iterations += 1
            self.dual_iterations += 1
            self._note_progress(float(best))
            self.z[self.basis] -= column * delta
            self.z[q] += delta
            leaving = int(self.basis[pos])
            self.status[leaving] = AT_LOWER if rising else AT_UPPER
            self.z[leaving] = target
            self.pivot(q, pos, column)


def solve_arrays(
    data: LpData,
    lb: np.ndarray | None = None,
    ub: np.ndarray | None = None,
    warm: WarmStart | None = None,
    max_iterations: int | None = None,
) -> LpSolution:
    """Solve the LP of ``data`` with optional overriding column bounds and a warm start."""

    lb = data.lb if lb is None else lb
    ub = data.ub if ub is None else ub
    if data.empty_row_infeasible or np.any(lb > ub + FEAS_TOL):
        return LpSolution(INFEASIBLE, None, np.inf, 0)
    if warm is not None and not warm.fits(data):
        warm = None
    limit = max_iterations or 20_000 + 50 * (data.n + data.m)
    try:
        solver = _Simplex(data, lb, ub, warm, limit)
    except np.linalg.LinAlgError:
        warm = None
        solver = _Simplex(data, lb, ub, None, limit)
    status = ""
    if warm is not None and solver.dual_feasible():
        status = solver.run_dual()
    if status in ("", OPTIMAL):
        status = solver.run()
    if status == OPTIMAL and solver.drifted():
        # re-price on a fresh factorisation
        solver.refactor()
        status = solver.run()
    warm_out = WarmStart(solver.basis.copy(), solver.status.copy(), solver.binv, solver.since_refactor)
    if status != OPTIMAL:
        return LpSolution(
            status,
            None,
            np.inf if status == INFEASIBLE else -np.inf,
            solver.iterations,
            warm_out,
            solver.bland,
            solver.dual_iterations,
        )
    x = solver.z[: data.n].copy()
    objective = float(data.cost[: data.n] @ x + data.c0)
    return LpSolution(OPTIMAL, x, objective, solver.iterations, warm_out, solver.bland, solver.dual_iterations)


def solve_lp(problem: MilpProblem, max_iterations: int | None = None) -> LpSolution:
    """Solve the LP relaxation of ``problem`` (binaries relaxed to their bounds)."""

    return solve_arrays(LpData.from_problem(problem), max_iterations=max_iterations)
