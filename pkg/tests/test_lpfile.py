import pytest

from cosimpc.branch_bound import solve_milp
from cosimpc.errors import ModelError, ParseError
from cosimpc.lpfile import CONSTANT_VAR, export_lp, format_lp, import_lp, parse_lp
from cosimpc.milp import BINARY, CONTINUOUS, EQ, GE, LE, MilpProblem


def sample_problem():
    problem = MilpProblem("sample")
    x = problem.add_var("x", CONTINUOUS, -2.5, 10)
    u = problem.add_var("u", BINARY)
    e = problem.add_var("E.0", CONTINUOUS, 1, 1)
    problem.add(x - 4 * u <= 0, name="link")
    problem.add(x + e >= 0.1)
    problem.add_constraint({x: 1e-9, u: 3.25}, EQ, 3.25, name="tiny")
    problem.set_objective(3 * x - u + 7.5)
    return problem


def structure(problem):
    return (
        [(var.name, var.kind, var.lb, var.ub) for var in problem.variables],
        [(row.name, row.terms, row.sense, row.rhs) for row in problem.constraints()],
        (problem.objective.terms, problem.objective.constant, problem.maximize),
    )


def test_round_trip_is_structurally_equal(tmp_path):
    problem = sample_problem()

    path = export_lp(problem, tmp_path / "sample.lp")
    loaded = import_lp(path)

    assert loaded.name == "sample"
    assert structure(loaded) == structure(problem)


def test_maximize_round_trip_keeps_the_sense():
    problem = MilpProblem("max")
    x = problem.add_var("x", CONTINUOUS, 0, 3)
    problem.set_objective(2 * x, maximize=True)

    text = format_lp(problem)
    loaded = parse_lp(text)

    assert "Maximize" in text
    assert loaded.maximize
    assert loaded.objective.terms == {0: -2.0}


def test_long_rows_wrap_and_parse_back():
    problem = MilpProblem("wide")
    variables = [problem.add_var(f"p{i}", CONTINUOUS, 0, 1) for i in range(30)]
    problem.add_constraint({var: i + 1 for i, var in enumerate(variables)}, LE, 12, name="wide_row")
    problem.set_objective(sum(variables))

    text = format_lp(problem)

    assert max(len(line) for line in text.splitlines()) < 255
    assert structure(parse_lp(text, "wide")) == structure(problem)


def test_empty_problem_is_a_valid_file():
    text = format_lp(MilpProblem("empty"))
    loaded = parse_lp(text)

    assert "Subject To" in text
    assert f"{CONSTANT_VAR} = 1" in text
    assert loaded.num_vars == 0 and loaded.num_constraints == 0


def test_solutions_agree_after_round_trip(tmp_path):
    problem = sample_problem()
    loaded = import_lp(export_lp(problem, tmp_path / "p.lp"))

    assert solve_milp(loaded).objective == pytest.approx(solve_milp(problem).objective)


@pytest.mark.parametrize(
    "text, line, message",
    [
        ("Minimize\n obj: x\nSubject To\n c1: x =! 1\nBounds\n 0 <= x <= 1\nEnd\n", 4, "malformed sense"),
        ("Minimize\n obj: x\nSubject To\n c1: x <= \nBounds\n 0 <= x <= 1\nEnd\n", 4, "right-hand side"),
        ("Minimize\n obj: x\nBounds\n x free\nEnd\n", 4, "not supported"),
        ("Minimize\n obj: x\nBounds\n 0 <= x <= 1\nGenerals\n x\nEnd\n", 5, "general integer"),
        ("Minimize\n obj: x + y\nBounds\n 0 <= x <= 1\nEnd\n", 2, "no bounds declaration"),
        (" obj: x\n", 1, "before the objective"),
        ("Minimize\n obj: 3 x $\nEnd\n", 2, "unexpected character"),
        ("Minimize\n obj: x\nBounds\n x >= 0\nEnd\n", 4, "no finite upper bound"),
    ],
)
def test_malformed_files_report_line_numbers(text, line, message):
    with pytest.raises(ParseError, match=message) as excinfo:
        parse_lp(text)

    assert excinfo.value.line == line


def test_parser_accepts_common_spellings():
    text = """\\ hand written
maximize
 profit: 2 x + 3 y
such that
 cap: x + y <= 4
 -x + y >= -2
bounds
 x <= 3
 x >= 0
 0 <= y <= 1
binary
 y
end
"""

    problem = parse_lp(text)

    assert [var.name for var in problem.variables] == ["x", "y"]
    assert problem.var("y").kind == BINARY
    assert problem.constraint("c1").sense == GE
    assert problem.constraint("cap").sense == LE
    assert solve_milp(problem).objective == pytest.approx(9.0)


@pytest.mark.parametrize("name", ["end", "bin", "Binary", "st", "MINIMIZE", "free", "inf", CONSTANT_VAR])
def test_keyword_named_variables_are_refused(name):
    problem = MilpProblem("keywords")
    problem.add_var(name, BINARY)
    problem.add_var("x", CONTINUOUS, 0, 1)

    with pytest.raises(ModelError, match="reserved"):
        format_lp(problem)


def test_names_containing_keywords_still_round_trip():
    problem = MilpProblem("keywords")
    ending = problem.add_var("end_0", BINARY)
    start = problem.add_var("st.1", CONTINUOUS, 0, 2)
    problem.add(start - 2 * ending <= 0, name="bin")
    problem.set_objective(-start)

    assert structure(parse_lp(format_lp(problem), "keywords")) == structure(problem)
