"""Brute-force reference solvers used by the LP and MILP tests."""

from __future__ import annotations

import itertools

import numpy as np

from cosimpc.simplex import INFEASIBLE, OPTIMAL, LpData, solve_arrays

TOL = 1e-7


def vertex_enumeration(a, c, c0, row_lo, row_hi, lb, ub):
    """Minimize c x + c0 over a bounded polytope by trying every vertex.

    Returns ("optimal", value) or ("infeasible", inf).
    """

    a = np.asarray(a, dtype=float).reshape(len(row_lo), len(c))
    n = len(c)
    if n == 0:
        activity = np.zeros(len(row_lo))
        feasible = np.all(activity >= row_lo - TOL) and np.all(activity <= row_hi + TOL)
        return ("optimal", float(c0)) if feasible else ("infeasible", np.inf)
    planes, values = [], []
    for j in range(n):
        unit = np.zeros(n)
        unit[j] = 1.0
        planes += [unit, unit]
        values += [lb[j], ub[j]]
    for i in range(len(row_lo)):
        for bound in (row_lo[i], row_hi[i]):
            if np.isfinite(bound) and np.any(a[i]):
                planes.append(a[i])
                values.append(bound)
    planes = np.array(planes)
    values = np.array(values)
    combos = np.array(list(itertools.combinations(range(len(planes)), n)))
    mats = planes[combos]
    keep = np.abs(np.linalg.det(mats)) > 1e-9
    if not keep.any():
        return "infeasible", np.inf
    points = np.linalg.solve(mats[keep], values[combos[keep]][..., None])[..., 0]
    activity = points @ a.T if len(row_lo) else np.zeros((len(points), 0))
    feasible = (
        np.all(points >= lb - TOL, axis=1)
        & np.all(points <= ub + TOL, axis=1)
        & np.all(activity >= row_lo - TOL, axis=1)
        & np.all(activity <= row_hi + TOL, axis=1)
    )
    if not feasible.any():
        return "infeasible", np.inf
    return "optimal", float((points[feasible] @ c).min() + c0)


def binary_enumeration(arrays):
    """Minimize a ProblemArrays MILP by fixing every binary assignment."""

    binary = np.flatnonzero(arrays.binary)
    continuous = np.flatnonzero(~arrays.binary)
    best = np.inf
    for assignment in itertools.product((0.0, 1.0), repeat=len(binary)):
        y = np.array(assignment)
        if np.any(y < arrays.lb[binary]) or np.any(y > arrays.ub[binary]):
            continue
        fixed = arrays.a[:, binary] @ y if len(binary) else np.zeros(arrays.a.shape[0])
        status, value = vertex_enumeration(
            arrays.a[:, continuous],
            arrays.c[continuous],
            arrays.c0 + (arrays.c[binary] @ y if len(binary) else 0.0),
            arrays.row_lo - fixed,
            arrays.row_hi - fixed,
            arrays.lb[continuous],
            arrays.ub[continuous],
        )
        if status == "optimal":
            best = min(best, value)
    return ("optimal", best) if np.isfinite(best) else ("infeasible", np.inf)


def ordered_branching(arrays):
    """Minimize a ProblemArrays MILP by branching on binaries in index order.

    Every node is a cold LP solve with the binaries fixed so far; a node is cut
    only when its LP is infeasible or no better than the best leaf. No bound
    propagation, rounding or warm starts.
    """

    data = LpData.from_arrays(arrays)
    binary = np.flatnonzero(arrays.binary)
    best = np.inf

    def visit(depth, lb, ub):
        nonlocal best
        lp = solve_arrays(data, lb, ub)
        if lp.status != OPTIMAL:
            if lp.status != INFEASIBLE:
                raise AssertionError(f"reference LP ended with {lp.status}")
            return
        if lp.objective >= best - 1e-9:
            return
        x = lp.x[binary]
        if depth == len(binary) or np.all(np.abs(x - np.round(x)) <= TOL):
            best = lp.objective
            return
        j = binary[depth]
        for value in (0.0, 1.0):
            if lb[j] <= value <= ub[j]:
                child_lb, child_ub = lb.copy(), ub.copy()
                child_lb[j] = child_ub[j] = value
                visit(depth + 1, child_lb, child_ub)

    visit(0, data.lb.copy(), data.ub.copy())
    return ("optimal", best) if np.isfinite(best) else ("infeasible", np.inf)
