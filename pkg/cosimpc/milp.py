"""MILP modeller: variables, linear expressions, constraints, objective.

Expressions are built with ordinary arithmetic::

    problem = MilpProblem("toy")
    x = problem.add_var("x", CONTINUOUS, 0, 10)
    u = problem.add_var("u", BINARY)
    problem.add(x - 4 * u <= 0)
    problem.set_objective(3 * x - u)

The canonical form always minimizes; ``set_objective(expr, maximize=True)``
stores the negated objective and remembers the sense for reporting.
"""

from __future__ import annotations

import math
import numbers
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

import numpy as np

from cosimpc.errors import DuplicateName, InvalidBounds, ModelError, UnknownVariable

CONTINUOUS = "continuous"
BINARY = "binary"
KINDS = (CONTINUOUS, BINARY)

LE = "<="
GE = ">="
EQ = "="
SENSES = (LE, GE, EQ)

NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*")

Number = Union[int, float]


class Var:
    __slots__ = ("index", "name", "kind", "lb", "ub")
    __hash__ = object.__hash__

    def __init__(self, index: int, name: str, kind: str, lb: float, ub: float):
        self.index = index
        self.name = name
        self.kind = kind
        self.lb = lb
        self.ub = ub

    @property
    def is_binary(self) -> bool:
        return self.kind == BINARY

    def to_expr(self) -> "LinExpr":
        return LinExpr({self.index: 1.0})

    def __add__(self, other):
        return self.to_expr() + other

    __radd__ = __add__

    def __sub__(self, other):
        return self.to_expr() - other

    def __rsub__(self, other):
        return other - self.to_expr()

    def __mul__(self, other):
        return self.to_expr() * other

    __rmul__ = __mul__

    def __neg__(self):
        return self.to_expr() * -1.0

    def __le__(self, other):
        return self.to_expr() <= other

    def __ge__(self, other):
        return self.to_expr() >= other

    def __eq__(self, other):
        return self.to_expr() == other

    def __repr__(self) -> str:
        return f"Var({self.name}, {self.kind}, [{self.lb}, {self.ub}])"


class LinExpr:
    """Sparse linear expression: coefficient per variable index plus a constant."""

    __slots__ = ("terms", "constant")
    __hash__ = None

    def __init__(self, terms: Mapping[int, float] | None = None, constant: float = 0.0):
        self.terms: dict[int, float] = dict(terms or {})
        self.constant = float(constant)

    @staticmethod
    def of(value: "LinExpr | Var | Number") -> "LinExpr":
        if isinstance(value, LinExpr):
            return value
        if isinstance(value, Var):
            return value.to_expr()
        if isinstance(value, numbers.Real):
            return LinExpr(constant=value)
        raise TypeError(f"Cannot use {type(value).__name__} in a linear expression")

    def copy(self) -> "LinExpr":
        return LinExpr(self.terms, self.constant)

    def add_term(self, var: Var | int, coefficient: float) -> "LinExpr":
        index = var.index if isinstance(var, Var) else var
        self.terms[index] = self.terms.get(index, 0.0) + float(coefficient)
        return self

    def __iadd__(self, other):
        other = LinExpr.of(other)
        for index, coefficient in other.terms.items():
            self.terms[index] = self.terms.get(index, 0.0) + coefficient
        self.constant += other.constant
        return self

    def __add__(self, other):
        result = self.copy()
        result += other
        return result

    __radd__ = __add__

    def __sub__(self, other):
        return self + LinExpr.of(other) * -1.0

    def __rsub__(self, other):
        return LinExpr.of(other) + self * -1.0

    def __mul__(self, other):
        if not isinstance(other, numbers.Real):
            raise TypeError("Linear expressions can only be scaled by numbers")
        factor = float(other)
        return LinExpr({index: coefficient * factor for index, coefficient in self.terms.items()}, self.constant * factor)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __le__(self, other):
        return Relation.build(self, LE, other)

    def __ge__(self, other):
        return Relation.build(self, GE, other)

    def __eq__(self, other):
        return Relation.build(self, EQ, other)

    def value(self, x: np.ndarray) -> float:
        return self.constant + sum(coefficient * x[index] for index, coefficient in self.terms.items())

    def __repr__(self) -> str:
        return f"LinExpr({self.terms}, {self.constant})"


def lin_sum(items: Iterable["LinExpr | Var | Number"]) -> LinExpr:
    total = LinExpr()
    for item in items:
        total += item
    return total


@dataclass(frozen=True)
class Relation:
    terms: dict[int, float]
    sense: str
    rhs: float

    @classmethod
    def build(cls, left, sense: str, right) -> "Relation":
        expr = LinExpr.of(left) - LinExpr.of(right)
        return cls(expr.terms, sense, -expr.constant)


@dataclass(frozen=True)
class Constraint:
    name: str
    terms: dict[int, float]
    sense: str
    rhs: float


class MilpProblem:
    """Incrementally built MILP in minimization form."""

    def __init__(self, name: str = "problem"):
        self.name = name
        self.variables: list[Var] = []
        self._by_name: dict[str, Var] = {}
        self._row_terms: list[dict[int, float]] = []
        self._row_senses: list[str] = []
        self._row_rhs: list[float] = []
        self._row_names: list[str] = []
        self._row_index: dict[str, int] = {}
        self.objective = LinExpr()
        self.maximize = False

    # variables ---------------------------------------------------------

    def add_var(self, name: str, kind: str = CONTINUOUS, lb: Number | None = None, ub: Number | None = None) -> Var:
        if name in self._by_name:
            raise DuplicateName(f"Variable {name} already exists.")
        if not NAME_RE.fullmatch(name):
            raise ModelError(f"Invalid variable name: {name!r}")
        if kind not in KINDS:
            raise ModelError(f"Unknown variable kind: {kind}")
        if kind == BINARY:
            lb = 0.0 if lb is None else lb
            ub = 1.0 if ub is None else ub
        if lb is None or ub is None:
            raise InvalidBounds(f"Variable {name} needs explicit finite bounds.")
        lb, ub = float(lb), float(ub)
        if not (math.isfinite(lb) and math.isfinite(ub)):
            raise InvalidBounds(f"Variable {name} has non-finite bounds [{lb}, {ub}].")
        if lb > ub:
            raise InvalidBounds(f"Variable {name} has lb {lb} > ub {ub}.")
        if kind == BINARY and (lb < 0.0 or ub > 1.0):
            raise InvalidBounds(f"Binary variable {name} must have bounds within [0, 1].")
        var = Var(len(self.variables), name, kind, lb, ub)
        self.variables.append(var)
        self._by_name[name] = var
        return var

    def var(self, name: str) -> Var:
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownVariable(f"No variable named {name}") from None

    def has_var(self, name: str) -> bool:
        return name in self._by_name

    # constraints -------------------------------------------------------

    def add_constraint(
        self,
        expr: "LinExpr | Var | Relation | Mapping[Var | int, Number]",
        sense: str | None = None,
        rhs: Number | None = None,
        name: str | None = None,
    ) -> int:
        """Add a row. Accepts a Relation, or an expression / term mapping with sense and rhs."""

        if isinstance(expr, Relation):
            terms, sense, rhs = expr.terms, expr.sense, expr.rhs
        else:
            if sense not in SENSES:
                raise ModelError(f"Unknown constraint sense: {sense}")
            if rhs is None:
                raise ModelError("Constraint needs a right-hand side.")
            if isinstance(expr, Mapping):
                terms = {}
                for key, coefficient in expr.items():
                    index = key.index if type(key) is Var else int(key)
                    terms[index] = terms.get(index, 0.0) + float(coefficient)
                rhs = float(rhs)
            else:
                linear = LinExpr.of(expr)
                terms = linear.terms
                rhs = float(rhs) - linear.constant
        n_vars = len(self.variables)
        if terms and not (0 <= min(terms) and max(terms) < n_vars):
            bad = next(index for index in terms if not 0 <= index < n_vars)
            raise UnknownVariable(f"Constraint references unknown variable index {bad}")
        if not math.isfinite(rhs):
            raise ModelError("Constraint right-hand side must be finite.")
        row = len(self._row_terms)
        name = name or f"c{row}"
        if name in self._row_index:
            raise DuplicateName(f"Constraint {name} already exists.")
        self._row_terms.append({index: coefficient for index, coefficient in terms.items() if coefficient != 0.0})
        self._row_senses.append(sense)
        self._row_rhs.append(float(rhs))
        self._row_names.append(name)
        self._row_index[name] = row
        return row

    def add(self, relation: Relation, name: str | None = None) -> int:
        return self.add_constraint(relation, name=name)

    def constraint(self, row: int | str) -> Constraint:
        if isinstance(row, str):
            row = self._row_index[row]
        return Constraint(self._row_names[row], dict(self._row_terms[row]), self._row_senses[row], self._row_rhs[row])

    def constraints(self) -> list[Constraint]:
        return [self.constraint(row) for row in range(len(self._row_terms))]

    # objective ---------------------------------------------------------

    def set_objective(self, expr: "LinExpr | Var | Number", maximize: bool = False) -> None:
        expr = LinExpr.of(expr)
        for index in expr.terms:
            if not 0 <= index < len(self.variables):
                raise UnknownVariable(f"Objective references unknown variable index {index}")
        self.maximize = maximize
        self.objective = expr * -1.0 if maximize else expr.copy()

    def reported_objective(self, canonical_value: float) -> float:
        """Convert a minimization-form objective value back to the user's sense."""

        return -canonical_value if self.maximize else canonical_value

    # inspection --------------------------------------------------------

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    @property
    def num_constraints(self) -> int:
        return len(self._row_terms)

    @property
    def num_binaries(self) -> int:
        return sum(1 for var in self.variables if var.kind == BINARY)

    @property
    def num_continuous(self) -> int:
        return self.num_vars - self.num_binaries

    @property
    def nonzeros(self) -> int:
        return sum(len(terms) for terms in self._row_terms)

    def size_summary(self) -> dict:
        return {
            "variables": self.num_vars,
            "continuous": self.num_continuous,
            "binary": self.num_binaries,
            "constraints": self.num_constraints,
            "nonzeros": self.nonzeros,
        }

    def arrays(self) -> "ProblemArrays":
        """Dense numpy view used by the solvers."""

        n, m = self.num_vars, self.num_constraints
        a = np.zeros((m, n))
        for row, terms in enumerate(self._row_terms):
            if terms:
                a[row, list(terms)] = list(terms.values())
        c = np.zeros(n)
        for index, coefficient in self.objective.terms.items():
            c[index] += coefficient
        row_lo = np.array([rhs if sense in (GE, EQ) else -np.inf for sense, rhs in zip(self._row_senses, self._row_rhs)])
        row_hi = np.array([rhs if sense in (LE, EQ) else np.inf for sense, rhs in zip(self._row_senses, self._row_rhs)])
        return ProblemArrays(
            a=a,
            c=c,
            c0=self.objective.constant,
            row_lo=row_lo.reshape(m),
            row_hi=row_hi.reshape(m),
            lb=np.array([var.lb for var in self.variables]),
            ub=np.array([var.ub for var in self.variables]),
            binary=np.array([var.kind == BINARY for var in self.variables], dtype=bool),
        )

    def check_point(self, x: np.ndarray, tol: float = 1e-6) -> list[str]:
        """Return the names of rows and bounds violated by ``x`` beyond ``tol``."""

        violated = []
        for var in self.variables:
            if x[var.index] < var.lb - tol or x[var.index] > var.ub + tol:
                violated.append(var.name)
        for row, terms in enumerate(self._row_terms):
            activity = sum(coefficient * x[index] for index, coefficient in terms.items())
            sense, rhs = self._row_senses[row], self._row_rhs[row]
            if (sense in (LE, EQ) and activity > rhs + tol) or (sense in (GE, EQ) and activity < rhs - tol):
                violated.append(self._row_names[row])
        return violated


@dataclass(frozen=True)
class ProblemArrays:
    a: np.ndarray
    c: np.ndarray
    c0: float
    row_lo: np.ndarray
    row_hi: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    binary: np.ndarray
