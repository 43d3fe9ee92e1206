"""Bound propagation and a fix-and-propagate rounding heuristic.

Activity ranges of a row imply bounds on every column it touches; binary
columns round those bounds to 0 or 1. After a bound change only the rows
touching changed columns are visited again. The problem itself is never
modified: propagation works on a node's own copy of the column bounds.
"""

from __future__ import annotations

import logging
from typing import Iterable

import numpy as np

from cosimpc.simplex import LpData

logger = logging.getLogger(__name__)

PROPAGATION_TOL = 1e-6
MAX_ROUNDS = 25


def _rows_touching(a: np.ndarray, columns: Iterable[int]) -> np.ndarray:
    columns = np.asarray(list(columns), dtype=int)
    if columns.size == 0:
        return columns
    return np.flatnonzero(np.any(a[:, columns] != 0.0, axis=1))


def propagate(data: LpData, lb: np.ndarray, ub: np.ndarray, changed: Iterable[int] | None = None) -> bool:
    """Tighten ``lb`` and ``ub`` in place.

    ``changed`` names the columns whose bounds moved since the last call;
    ``None`` visits every row. Returns False when a row cannot be satisfied
    within the bounds.
    """

    a = data.a
    if data.m == 0 or data.n == 0:
        return bool(np.all(lb <= ub + PROPAGATION_TOL))
    rows = np.arange(data.m) if changed is None else _rows_touching(a, changed)
    binary = data.binary
    for _ in range(MAX_ROUNDS):
        if rows.size == 0:
            break
        sub = a[rows]
        pos = np.where(sub > 0.0, sub, 0.0)
        neg = np.where(sub < 0.0, sub, 0.0)
        min_act = pos @ lb + neg @ ub
        max_act = pos @ ub + neg @ lb
        row_lo = data.row_lo[rows]
        row_hi = data.row_hi[rows]
        with np.errstate(invalid="ignore"):
            if np.any(min_act > row_hi + PROPAGATION_TOL * (1.0 + np.abs(row_hi))) or np.any(
                max_act < row_lo - PROPAGATION_TOL * (1.0 + np.abs(row_lo))
            ):
                return False
        slack_hi = (row_hi - min_act)[:, None]
        slack_lo = (row_lo - max_act)[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            upper = np.where(sub > 0.0, lb + slack_hi / sub, np.where(sub < 0.0, lb + slack_lo / sub, np.inf))
            lower = np.where(sub > 0.0, ub + slack_lo / sub, np.where(sub < 0.0, ub + slack_hi / sub, -np.inf))
        implied_ub = np.nan_to_num(upper, nan=np.inf).min(axis=0)
        implied_lb = np.nan_to_num(lower, nan=-np.inf).max(axis=0)
        with np.errstate(invalid="ignore"):
            new_ub = np.where(binary, np.floor(implied_ub + PROPAGATION_TOL), implied_ub + 1e-9 * (1.0 + np.abs(implied_ub)))
            new_lb = np.where(binary, np.ceil(implied_lb - PROPAGATION_TOL), implied_lb - 1e-9 * (1.0 + np.abs(implied_lb)))
            tighter_ub = new_ub < ub - PROPAGATION_TOL * (1.0 + np.abs(ub))
            tighter_lb = new_lb > lb + PROPAGATION_TOL * (1.0 + np.abs(lb))
        ub[tighter_ub] = new_ub[tighter_ub]
        lb[tighter_lb] = new_lb[tighter_lb]
        if np.any(lb > ub + PROPAGATION_TOL * (1.0 + np.abs(ub))):
            return False
        crossed = lb > ub
        lb[crossed] = ub[crossed]
        rows = _rows_touching(a, np.flatnonzero(tighter_ub | tighter_lb))
    return True


def round_and_fix(
    data: LpData,
    lb: np.ndarray,
    ub: np.ndarray,
    x: np.ndarray,
    int_tol: float = 1e-6,
) -> tuple[np.ndarray, np.ndarray] | None:
    """Fix every binary near its LP value, propagating after each fix.

    Binaries already integral in ``x`` are fixed together; the fractional
    ones follow nearest-first, each trying its rounded value and then the
    other one. Returns the fixed bounds, or None when both values of some
    binary fail.
    """

    lb = lb.copy()
    ub = ub.copy()
    free = np.flatnonzero(data.binary & (lb < ub))
    if free.size == 0:
        return lb, ub
    target = np.clip(np.round(x[free]), lb[free], ub[free])
    distance = np.abs(x[free] - target)
    integral = free[distance <= int_tol]
    lb[integral] = ub[integral] = target[distance <= int_tol]
    if integral.size and not propagate(data, lb, ub, integral):
        return None
    order = np.argsort(distance, kind="stable")
    for k in order:
        j = int(free[k])
        if distance[k] <= int_tol or lb[j] == ub[j]:
            continue
        nearest = float(target[k])
        for value in (nearest, 1.0 - nearest):
            trial_lb, trial_ub = lb.copy(), ub.copy()
            trial_lb[j] = trial_ub[j] = value
            if propagate(data, trial_lb, trial_ub, [j]):
                lb, ub = trial_lb, trial_ub
                break
        else:
            logger.debug("rounding failed at binary %d", j)
            return None
    return lb, ub
