"""CPLEX-style LP text files for MilpProblem.

Only the subset the modeller can express is written and read back: one
objective, linear rows, explicit finite bounds on every variable and a
``Binaries`` section. A constant objective term is carried by the fixed
variable ``ONE_VAR_CONSTANT``.
"""

from __future__ import annotations

import re
from pathlib import Path

from cosimpc.errors import ModelError, ParseError
from cosimpc.milp import BINARY, CONTINUOUS, EQ, GE, LE, LinExpr, MilpProblem

CONSTANT_VAR = "ONE_VAR_CONSTANT"
TERMS_PER_LINE = 8

SECTIONS = {
    "minimize": "min",
    "minimum": "min",
    "min": "min",
    "maximize": "max",
    "maximum": "max",
    "max": "max",
    "subject to": "rows",
    "such that": "rows",
    "st": "rows",
    "s.t.": "rows",
    "bounds": "bounds",
    "bound": "bounds",
    "binaries": "binaries",
    "binary": "binaries",
    "bin": "binaries",
    "generals": "generals",
    "general": "generals",
    "gen": "generals",
    "end": "end",
}

# words the parser reads as headers or special values wherever they stand alone
RESERVED_NAMES = frozenset(key for key in SECTIONS if " " not in key) | {"inf", "infinity", "free", CONSTANT_VAR.lower()}

SENSE_TOKENS = {"<=": LE, "=<": LE, "<": LE, ">=": GE, "=>": GE, ">": GE, "=": EQ}

TOKEN_RE = re.compile(
    r"""
    (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)
    |(?P<name>[A-Za-z_][A-Za-z0-9_.\[\]]*)
    |(?P<sign>[-+])
    |(?P<op>[<>=!]+)
    |(?P<colon>:)
    |(?P<space>\s+)
    |(?P<other>.)
    """,
    re.VERBOSE,
)


def _num(value: float) -> str:
    return format(value, ".17g")


def _terms(pairs: list[tuple[float, str]]) -> list[str]:
    return [f"{'-' if coefficient < 0 else '+'}{_num(abs(coefficient))} {name}" for coefficient, name in pairs]


def _wrap(head: str, parts: list[str]) -> list[str]:
    lines = []
    for start in range(0, max(len(parts), 1), TERMS_PER_LINE):
        chunk = " ".join(parts[start : start + TERMS_PER_LINE])
        lines.append(f"{head} {chunk}".rstrip() if start == 0 else f"   {chunk}")
    return lines


def format_lp(problem: MilpProblem) -> str:
    """Render ``problem`` as LP text.

    Raises ModelError for a variable named like a section keyword (``end``,
    ``bin``, ``st`` ...), an infinity or free marker, or ``ONE_VAR_CONSTANT``:
    the file would not read back.
    """

    names = [var.name for var in problem.variables]
    clashing = [name for name in names if name.lower() in RESERVED_NAMES]
    if clashing:
        raise ModelError(f"Variable names reserved in LP files: {', '.join(clashing)}")
    objective = problem.objective * -1.0 if problem.maximize else problem.objective
    obj_pairs = [(coefficient, names[index]) for index, coefficient in sorted(objective.terms.items())]
    constraints = problem.constraints()
    uses_constant = objective.constant != 0.0 or not obj_pairs or any(not row.terms for row in constraints)
    if objective.constant != 0.0 or not obj_pairs:
        obj_pairs.append((objective.constant, CONSTANT_VAR))

    lines = [f"\\* Problem: {problem.name} *\\", "", "Maximize" if problem.maximize else "Minimize"]
    lines += _wrap(" obj:", _terms(obj_pairs))
    lines += ["", "Subject To"]
    for row in constraints:
        pairs = [(coefficient, names[index]) for index, coefficient in sorted(row.terms.items())]
        parts = _terms(pairs) or [f"+0 {CONSTANT_VAR}"]
        parts.append(f"{row.sense} {_num(row.rhs)}")
        lines += _wrap(f" {row.name}:", parts)
    lines += ["", "Bounds"]
    for var in problem.variables:
        lines.append(f" {var.name} = {_num(var.lb)}" if var.lb == var.ub else f" {_num(var.lb)} <= {var.name} <= {_num(var.ub)}")
    if uses_constant:
        lines.append(f" {CONSTANT_VAR} = 1")
    binaries = [var.name for var in problem.variables if var.kind == BINARY]
    if binaries:
        lines += ["", "Binaries"]
        lines += [f" {name}" for name in binaries]
    lines += ["", "End", ""]
    return "\n".join(lines)


def export_lp(problem: MilpProblem, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_lp(problem), encoding="utf-8")
    return path


# --- parsing ---------------------------------------------------------------


def _tokenize(text: str, line: int) -> list[tuple[str, str, int]]:
    tokens = []
    for match in TOKEN_RE.finditer(text):
        kind = match.lastgroup
        value = match.group()
        if kind == "space":
            continue
        if kind == "other":
            raise ParseError(f"unexpected character {value!r}", line)
        tokens.append((kind, value, line))
    return tokens


class _Statement:
    """Tokens of one objective or constraint, possibly spread over several lines."""

    def __init__(self, tokens: list[tuple[str, str, int]]):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self):
        token = self.peek()
        self.pos += 1
        return token


def _label(statement: _Statement) -> str | None:
    tokens = statement.tokens
    if len(tokens) >= 2 and tokens[0][0] == "name" and tokens[1][0] == "colon":
        statement.pos = 2
        return tokens[0][1]
    return None


def _linear(statement: _Statement, stop_at_sense: bool) -> list[tuple[float, str]]:
    terms = []
    while statement.peek() is not None:
        kind, value, line = statement.peek()
        if kind == "op":
            if not stop_at_sense:
                raise ParseError(f"unexpected operator {value!r}", line)
            if value not in SENSE_TOKENS:
                raise ParseError(f"malformed sense token {value!r}", line)
            break
        sign = 1.0
        while kind == "sign":
            statement.take()
            sign = -sign if value == "-" else sign
            if statement.peek() is None:
                raise ParseError("dangling sign", line)
            kind, value, line = statement.peek()
        coefficient = 1.0
        if kind == "number":
            coefficient = float(value)
            statement.take()
            if statement.peek() is None or statement.peek()[0] != "name":
                raise ParseError("a coefficient must be followed by a variable name", line)
            kind, value, line = statement.peek()
        if kind != "name":
            raise ParseError(f"unexpected token {value!r}", line)
        statement.take()
        terms.append((sign * coefficient, value))
    return terms


def _signed_number(statement: _Statement, line: int) -> float:
    sign = 1.0
    token = statement.take()
    while token is not None and token[0] == "sign":
        sign = -sign if token[1] == "-" else sign
        token = statement.take()
    if token is None:
        raise ParseError("missing right-hand side", line)
    if token[0] == "name" and token[1].lower() in ("inf", "infinity"):
        raise ParseError("infinite values are not supported", token[2])
    if token[0] != "number":
        raise ParseError(f"expected a number, got {token[1]!r}", token[2])
    return sign * float(token[1])


def _parse_bound(tokens: list[tuple[str, str, int]], line: int) -> tuple[str, float | None, float | None]:
    """Return (name, lower, upper) for one Bounds line."""

    if any(kind == "name" and value.lower() in ("inf", "infinity", "free") for kind, value, _ in tokens):
        raise ParseError("free or infinite bounds are not supported", line)
    statement = _Statement(tokens)
    ops = [(i, value) for i, (kind, value, _) in enumerate(tokens) if kind == "op"]
    for _, value in ops:
        if value not in SENSE_TOKENS:
            raise ParseError(f"malformed sense token {value!r}", line)
    names = [value for kind, value, _ in tokens if kind == "name"]
    if len(names) != 1 or not ops:
        raise ParseError("cannot parse bound", line)
    name = names[0]
    if len(ops) == 2:
        # lo <= x <= hi
        lo = _signed_number(_Statement(tokens[: ops[0][0]]), line)
        hi = _signed_number(_Statement(tokens[ops[1][0] + 1 :]), line)
        if SENSE_TOKENS[ops[0][1]] != LE or SENSE_TOKENS[ops[1][1]] != LE:
            raise ParseError("double bounds must use <=", line)
        return name, lo, hi
    index, op = ops[0]
    sense = SENSE_TOKENS[op]
    if tokens[0][0] == "name":
        statement.pos = index + 1
        value = _signed_number(statement, line)
    else:
        value = _signed_number(_Statement(tokens[:index]), line)
        sense = {LE: GE, GE: LE, EQ: EQ}[sense]
    if sense == EQ:
        return name, value, value
    return (name, value, None) if sense == GE else (name, None, value)


def parse_lp(text: str, name: str = "problem") -> MilpProblem:
    """Parse LP text produced by ``format_lp`` (or any file in the same subset)."""

    section = None
    maximize = False
    statements: dict[str, list[list[tuple[str, str, int]]]] = {"obj": [], "rows": []}
    bounds: dict[str, tuple[float | None, float | None]] = {}
    declared: list[str] = []
    declared_line: dict[str, int] = {}
    binaries: list[str] = []
    seen_end = False

    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        if seen_end:
            raise ParseError("content after End", number)
        header = SECTIONS.get(" ".join(line.lower().split()))
        if header is not None:
            if header == "generals":
                raise ParseError("general integer variables are not supported", number)
            if header == "end":
                seen_end = True
                continue
            if header in ("min", "max"):
                maximize = header == "max"
                section = "obj"
            else:
                section = header
            continue
        if section is None:
            raise ParseError("content before the objective section", number)
        tokens = _tokenize(line, number)
        if section in ("obj", "rows"):
            starts_new = (len(tokens) >= 2 and tokens[0][0] == "name" and tokens[1][0] == "colon") or not statements[section]
            if section == "rows" and statements["rows"] and not starts_new:
                last = statements["rows"][-1]
                # a row is complete once it holds a sense and a right-hand side
                starts_new = any(kind == "op" for kind, _, _ in last) and last[-1][0] == "number"
            if starts_new:
                statements[section].append(tokens)
            else:
                statements[section][-1].extend(tokens)
        elif section == "bounds":
            var, lo, hi = _parse_bound(tokens, number)
            old_lo, old_hi = bounds.get(var, (None, None))
            bounds[var] = (lo if lo is not None else old_lo, hi if hi is not None else old_hi)
            if var not in declared:
                declared.append(var)
                declared_line[var] = number
        elif section == "binaries":
            for kind, value, _ in tokens:
                if kind != "name":
                    raise ParseError(f"unexpected token {value!r} in Binaries", number)
                binaries.append(value)
                declared_line.setdefault(value, number)
    if len(statements["obj"]) > 1:
        raise ParseError("only one objective is supported", statements["obj"][1][0][2])

    problem = MilpProblem(name)
    for var in binaries:
        if var not in declared:
            declared.append(var)
    binary_set = set(binaries)
    for var in declared:
        if var == CONSTANT_VAR:
            continue
        lo, hi = bounds.get(var, (None, None))
        kind = BINARY if var in binary_set else CONTINUOUS
        if kind == CONTINUOUS:
            lo = 0.0 if lo is None else lo
            if hi is None:
                raise ParseError(f"variable {var} has no finite upper bound", declared_line[var])
        try:
            problem.add_var(var, kind, lo, hi)
        except ModelError as error:
            raise ParseError(str(error), declared_line[var]) from error

    def expression(terms: list[tuple[float, str]], line: int) -> LinExpr:
        expr = LinExpr()
        for coefficient, var in terms:
            if var == CONSTANT_VAR:
                expr += coefficient
            elif problem.has_var(var):
                expr.add_term(problem.var(var), coefficient)
            else:
                raise ParseError(f"variable {var} has no bounds declaration", line)
        return expr

    if statements["obj"]:
        statement = _Statement(statements["obj"][0])
        _label(statement)
        line = statement.tokens[0][2]
        problem.set_objective(expression(_linear(statement, stop_at_sense=False), line), maximize=maximize)
    for tokens in statements["rows"]:
        statement = _Statement(tokens)
        label = _label(statement)
        line = tokens[0][2]
        expr = expression(_linear(statement, stop_at_sense=True), line)
        op = statement.take()
        if op is None:
            raise ParseError("constraint without a sense", line)
        rhs = _signed_number(statement, op[2])
        if statement.peek() is not None:
            raise ParseError(f"unexpected token {statement.peek()[1]!r}", statement.peek()[2])
        try:
            problem.add_constraint(expr, SENSE_TOKENS[op[1]], rhs, name=label)
        except ModelError as error:
            raise ParseError(str(error), line) from error
    return problem


def import_lp(path: str | Path) -> MilpProblem:
    path = Path(path)
    return parse_lp(path.read_text(encoding="utf-8"), name=path.stem)
