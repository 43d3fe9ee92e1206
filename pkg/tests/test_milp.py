import time

import numpy as np
import pytest

from cosimpc.errors import DuplicateName, InvalidBounds, ModelError, UnknownVariable
from cosimpc.milp import BINARY, CONTINUOUS, EQ, GE, LE, LinExpr, MilpProblem, lin_sum


def test_add_var_returns_sequential_ids():
    problem = MilpProblem()

    assert problem.add_var("x", CONTINUOUS, 0, 10).index == 0
    assert problem.add_var("y", BINARY).index == 1
    assert (problem.var("y").lb, problem.var("y").ub) == (0.0, 1.0)


def test_add_var_rejects_bad_bounds_and_names():
    problem = MilpProblem()
    problem.add_var("x", CONTINUOUS, 0, 1)

    with pytest.raises(InvalidBounds, match="lb 2.0 > ub 1.0"):
        problem.add_var("z", CONTINUOUS, 2, 1)
    with pytest.raises(InvalidBounds, match="explicit finite bounds"):
        problem.add_var("free", CONTINUOUS)
    with pytest.raises(InvalidBounds):
        problem.add_var("big", CONTINUOUS, 0, float("inf"))
    with pytest.raises(InvalidBounds, match="within"):
        problem.add_var("b", BINARY, 0, 2)
    with pytest.raises(DuplicateName):
        problem.add_var("x", CONTINUOUS, 0, 1)
    with pytest.raises(ModelError, match="Invalid variable name"):
        problem.add_var("1x", CONTINUOUS, 0, 1)


def test_relation_builds_row():
    problem = MilpProblem()
    x = problem.add_var("x", CONTINUOUS, 0, 1)
    y = problem.add_var("y", CONTINUOUS, 0, 1)

    row = problem.add(x + y <= 1)

    constraint = problem.constraint(row)
    assert constraint.terms == {0: 1.0, 1: 1.0}
    assert (constraint.sense, constraint.rhs, constraint.name) == (LE, 1.0, "c0")


def test_constants_move_to_the_right_hand_side():
    problem = MilpProblem()
    x = problem.add_var("x", CONTINUOUS, 0, 5)

    problem.add(2 * x + 3 >= x - 1, name="shifted")
    problem.add_constraint(x + 4, EQ, 6)

    assert problem.constraint("shifted").terms == {0: 1.0}
    assert problem.constraint("shifted").rhs == -4.0
    assert problem.constraint(1).rhs == 2.0


def test_expression_merging_is_exact_and_associative():
    problem = MilpProblem()
    x, y, z = (problem.add_var(name, CONTINUOUS, 0, 1) for name in "xyz")

    left = (x + 2 * y) + (3 * z - y)
    right = x + (2 * y + (3 * z - y))

    assert left.terms == right.terms == {0: 1.0, 1: 1.0, 2: 3.0}
    assert lin_sum([x, y, 1.5, -y]).terms == {0: 1.0, 1: 0.0}
    assert lin_sum([x, y, 1.5, -y]).constant == 1.5


def test_constraint_with_unknown_variable():
    problem = MilpProblem()
    problem.add_var("x", CONTINUOUS, 0, 1)

    with pytest.raises(UnknownVariable):
        problem.add_constraint({5: 1.0}, LE, 1)
    with pytest.raises(ModelError, match="sense"):
        problem.add_constraint({0: 1.0}, "<", 1)


def test_maximize_is_stored_negated():
    problem = MilpProblem()
    x = problem.add_var("x", CONTINUOUS, 0, 4)

    problem.set_objective(3 * x + 1, maximize=True)

    assert problem.objective.terms == {0: -3.0}
    assert problem.objective.constant == -1.0
    assert problem.reported_objective(-13.0) == 13.0


def test_arrays_and_counts():
    problem = MilpProblem()
    x = problem.add_var("x", CONTINUOUS, 0, 4)
    u = problem.add_var("u", BINARY)
    problem.add(x - 4 * u <= 0)
    problem.add(x >= 1)
    problem.set_objective(x + 2 * u + 0.5)

    arrays = problem.arrays()

    assert arrays.a.tolist() == [[1.0, -4.0], [1.0, 0.0]]
    assert arrays.row_lo.tolist() == [-np.inf, 1.0]
    assert arrays.row_hi.tolist() == [0.0, np.inf]
    assert arrays.c.tolist() == [1.0, 2.0] and arrays.c0 == 0.5
    assert arrays.binary.tolist() == [False, True]
    assert problem.size_summary() == {"variables": 2, "continuous": 1, "binary": 1, "constraints": 2, "nonzeros": 3}
    assert problem.check_point(np.array([2.0, 0.0])) == ["c0"]


def test_linexpr_rejects_non_numbers():
    with pytest.raises(TypeError):
        LinExpr.of("x")
    problem = MilpProblem()
    x = problem.add_var("x", CONTINUOUS, 0, 1)
    with pytest.raises(TypeError):
        x * x


def build_large_problem(n_vars=10_000):
    problem = MilpProblem("large")
    variables = [problem.add_var(f"x{i}", CONTINUOUS, 0, 1) for i in range(n_vars)]
    for i in range(n_vars):
        problem.add_constraint({variables[i]: 1.0, variables[(i + 1) % n_vars]: 1.0}, LE, 1.5)
    return problem


def test_large_formulation_builds_in_under_100_ms():
    timings = []
    for _ in range(3):
        started = time.perf_counter()
        problem = build_large_problem()
        timings.append(time.perf_counter() - started)

    assert problem.num_vars == 10_000
    assert problem.nonzeros == 20_000
    assert min(timings) < 0.1
