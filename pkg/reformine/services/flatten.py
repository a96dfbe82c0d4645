"""Lowering of grounded specifications to a finite-domain CSP.

Booleans are 0/1 integers throughout. Quantifiers over domains are unrolled;
quantifiers over set and relation variables are unrolled over every candidate
tuple and guarded by that tuple's incidence variable (``guard_imp`` for forAll,
``guard_and`` for exists, ``guard_mul`` for sum). Guards are the only lazy
operators: everywhere else an undefined operand (division or modulo by zero)
makes the enclosing constraint false.

Comparisons whose sides are both linear become ``Linear`` terms in which equal
variables on the two sides cancel.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from itertools import product
from typing import Any, Literal, Union

from reformine.domain.ast import (
    DOMAIN_TYPES,
    REF_BINDER,
    REF_DECISION,
    Binary,
    BoolDomain,
    BoolLit,
    Domain,
    Expr,
    FindStmt,
    IntDomain,
    IntLit,
    ObjectiveStmt,
    Quantifier,
    Ref,
    RelationDomain,
    RelationLit,
    SpecAst,
    SuchThatStmt,
    TupleLit,
    Unary,
)
from reformine.domain.errors import ReformineError
from reformine.domain.models import DEFAULT_FLATTEN_CAP
from reformine.services.evaluator import EvaluationError, UndefinedArithmetic, arithmetic, compare, domain_values


LOG = logging.getLogger(__name__)

VarKind = Literal["int", "bool", "incidence"]


class FlattenError(ReformineError):
    """Raised when a grounded specification cannot be lowered to a CSP."""


@dataclass(frozen=True, slots=True)
class Const:
    value: int


@dataclass(frozen=True, slots=True)
class Var:
    index: int


@dataclass(frozen=True, slots=True)
class App:
    op: str
    args: tuple["Term", ...]


@dataclass(frozen=True, slots=True)
class Linear:
    """``sum(coeff * var) + const  op  0``."""

    op: str
    coeffs: tuple[tuple[int, int], ...]
    const: int


Term = Union[Const, Var, App, Linear]

TRUE = Const(1)
FALSE = Const(0)


@dataclass(frozen=True, slots=True)
class CspVar:
    name: str
    kind: VarKind
    lo: int
    hi: int
    owner: str
    row: tuple[int, ...] | None = None


@dataclass(frozen=True, slots=True)
class FindLayout:
    name: str
    kind: Literal["int", "bool", "relation"]
    indices: tuple[int, ...]
    arity: int = 0


@dataclass(slots=True)
class GroundCsp:
    variables: list[CspVar] = field(default_factory=list)
    constraints: list[Term] = field(default_factory=list)
    attr_constraints: list[Term] = field(default_factory=list)
    objective: tuple[str, Term] | None = None
    finds: list[FindLayout] = field(default_factory=list)

    def all_constraints(self) -> list[Term]:
        return [*self.constraints, *self.attr_constraints]

    def int_vars(self) -> list[CspVar]:
        return [v for v in self.variables if v.kind == "int"]

    def incidence_vars(self) -> list[CspVar]:
        return [v for v in self.variables if v.kind == "incidence"]

    def decode(self, raw: tuple[int, ...] | list[int]) -> dict[str, Any]:
        """Find values from a full assignment; sets and relations become sorted lists."""
        out: dict[str, Any] = {}
        for layout in self.finds:
            if layout.kind == "int":
                out[layout.name] = raw[layout.indices[0]]
            elif layout.kind == "bool":
                out[layout.name] = bool(raw[layout.indices[0]])
            else:
                rows = [self.variables[i].row for i in layout.indices if raw[i]]
                if layout.arity == 1:
                    out[layout.name] = [row[0] for row in rows]  # type: ignore[index]
                else:
                    out[layout.name] = [list(row) for row in rows]  # type: ignore[arg-type]
        return out


def variables_of(term: Term) -> set[int]:
    if isinstance(term, Var):
        return {term.index}
    if isinstance(term, Linear):
        return {index for index, _ in term.coeffs}
    if isinstance(term, App):
        found: set[int] = set()
        for arg in term.args:
            found |= variables_of(arg)
        return found
    return set()


# exact evaluation over complete assignments


def _exact_op(op: str, values: list[int]) -> int:
    if op == "add":
        return sum(values)
    if op == "neg":
        return -values[0]
    if op == "not":
        return 1 - values[0]
    if op == "and":
        return int(all(values))
    if op == "or":
        return int(any(values))
    if op == "imp":
        return int((not values[0]) or bool(values[1]))
    if op == "iff":
        return int(bool(values[0]) == bool(values[1]))
    if op in ("+", "-", "*", "/", "%"):
        return arithmetic(op, values[0], values[1])
    return int(compare(op, values[0], values[1]))


def evaluate_term(term: Term, values: list[int] | tuple[int, ...]) -> int:
    """Exact value under a complete assignment; raises ``UndefinedArithmetic``."""
    if isinstance(term, Const):
        return term.value
    if isinstance(term, Var):
        return values[term.index]
    if isinstance(term, Linear):
        total = term.const + sum(coeff * values[index] for index, coeff in term.coeffs)
        return int(compare(term.op, total, 0))
    if term.op in ("guard_imp", "guard_and", "guard_mul"):
        guard = evaluate_term(term.args[0], values)
        if not guard:
            return 1 if term.op == "guard_imp" else 0
        return evaluate_term(term.args[1], values)
    return _exact_op(term.op, [evaluate_term(arg, values) for arg in term.args])


def holds(term: Term, values: list[int] | tuple[int, ...]) -> bool:
    try:
        return evaluate_term(term, values) == 1
    except UndefinedArithmetic:
        return False


# construction with folding


def _app(op: str, *args: Term) -> Term:
    if op in ("and", "or"):
        neutral = 1 if op == "and" else 0
        flat: list[Term] = []
        for arg in args:
            if isinstance(arg, App) and arg.op == op:
                flat.extend(arg.args)
            elif not (isinstance(arg, Const) and arg.value == neutral):
                flat.append(arg)
        if not flat:
            return Const(neutral)
        if len(flat) == 1:
            return flat[0]
        args = tuple(flat)
    if op == "add":
        constant = sum(a.value for a in args if isinstance(a, Const))
        rest = [a for a in args if not isinstance(a, Const)]
        if not rest:
            return Const(constant)
        args = (*rest, Const(constant)) if constant else tuple(rest)
        if len(args) == 1:
            return args[0]
    if all(isinstance(a, Const) for a in args):
        try:
            return Const(_exact_op(op, [a.value for a in args]))  # type: ignore[union-attr]
        except UndefinedArithmetic:
            pass
    return App(op, tuple(args))


def _linear(term: Term) -> tuple[dict[int, int], int] | None:
    if isinstance(term, Const):
        return {}, term.value
    if isinstance(term, Var):
        return {term.index: 1}, 0
    if not isinstance(term, App):
        return None
    if term.op == "add":
        coeffs: dict[int, int] = {}
        constant = 0
        for arg in term.args:
            part = _linear(arg)
            if part is None:
                return None
            for index, coeff in part[0].items():
                coeffs[index] = coeffs.get(index, 0) + coeff
            constant += part[1]
        return coeffs, constant
    if term.op == "neg":
        part = _linear(term.args[0])
        return None if part is None else ({i: -c for i, c in part[0].items()}, -part[1])
    if term.op == "-":
        left, right = _linear(term.args[0]), _linear(term.args[1])
        if left is None or right is None:
            return None
        coeffs = dict(left[0])
        for index, coeff in right[0].items():
            coeffs[index] = coeffs.get(index, 0) - coeff
        return coeffs, left[1] - right[1]
    if term.op == "*":
        left, right = term.args
        if isinstance(left, Const):
            left, right = right, left
        if not isinstance(right, Const):
            return None
        part = _linear(left)
        if part is None:
            return None
        return {i: c * right.value for i, c in part[0].items()}, part[1] * right.value
    if term.op == "guard_mul" and isinstance(term.args[0], Var) and isinstance(term.args[1], Const):
        return {term.args[0].index: term.args[1].value}, 0
    return None


def _compare(op: str, left: Term, right: Term) -> Term:
    if isinstance(left, Const) and isinstance(right, Const):
        return Const(int(compare(op, left.value, right.value)))
    lhs, rhs = _linear(left), _linear(right)
    if lhs is None or rhs is None:
        return App(op, (left, right))
    coeffs = dict(lhs[0])
    for index, coeff in rhs[0].items():
        coeffs[index] = coeffs.get(index, 0) - coeff
    kept = tuple(sorted((i, c) for i, c in coeffs.items() if c != 0))
    constant = lhs[1] - rhs[1]
    if not kept:
        return Const(int(compare(op, constant, 0)))
    return Linear(op, kept, constant)


# lowering


SetMap = dict[tuple[int, ...], Term]


def resolve_flatten_cap(explicit: int | None = None) -> int:
    if explicit is not None:
        return explicit
    configured = (os.getenv("REFORMINE_FLATTEN_CAP") or "").strip()
    if configured.isdigit() and int(configured) > 0:
        return int(configured)
    return DEFAULT_FLATTEN_CAP


class _Lowering:
    def __init__(self, cap: int) -> None:
        self.cap = cap
        self.csp = GroundCsp()
        self.scalars: dict[str, int] = {}
        self.sets: dict[str, SetMap] = {}
        self.candidates = 0

    def declare(self, statement: FindStmt) -> None:
        domain = statement.domain
        name = statement.name
        if isinstance(domain, BoolDomain):
            index = self._add(CspVar(name, "bool", 0, 1, name))
            self.scalars[name] = index
            self.csp.finds.append(FindLayout(name, "bool", (index,)))
            return
        if isinstance(domain, IntDomain):
            lo, hi = _bounds(domain, name)
            index = self._add(CspVar(name, "int", lo, hi, name))
            self.scalars[name] = index
            self.csp.finds.append(FindLayout(name, "int", (index,)))
            return
        if not isinstance(domain, RelationDomain):
            raise FlattenError(f"find '{name}' has an unresolved domain {domain.kind}")
        ranges = [_value_range(c, name) for c in domain.components]
        count = math.prod(len(r) for r in ranges)
        self.candidates += count
        if self.candidates > self.cap:
            raise FlattenError(
                f"candidate tuple count {self.candidates} exceeds the cap of {self.cap} at find '{name}'"
            )
        members: SetMap = {}
        indices = []
        for row in product(*ranges):
            label = f"{name}[{','.join(str(v) for v in row)}]"
            index = self._add(CspVar(label, "incidence", 0, 1, name, tuple(row)))
            members[tuple(row)] = Var(index)
            indices.append(index)
        self.sets[name] = members
        self.csp.finds.append(FindLayout(name, "relation", tuple(indices), domain.arity))
        total = _app("add", *members.values())
        for attribute in domain.attrs:
            if not isinstance(attribute.value, IntLit):
                raise FlattenError(f"attribute {attribute.name} of '{name}' is not grounded")
            op = {"size": "=", "minSize": ">=", "maxSize": "<="}[attribute.name]
            self.csp.attr_constraints.append(_compare(op, total, Const(attribute.value.value)))

    def _add(self, var: CspVar) -> int:
        self.csp.variables.append(var)
        return len(self.csp.variables) - 1

    def post(self, term: Term) -> None:
        if isinstance(term, App) and term.op == "and":
            for part in term.args:
                self.post(part)
        elif term != TRUE:
            self.csp.constraints.append(term)

    def scalar(self, expr: Expr, env: dict[str, int]) -> Term:  # noqa: C901
        if isinstance(expr, IntLit):
            return Const(expr.value)
        if isinstance(expr, BoolLit):
            return Const(int(expr.value))
        if isinstance(expr, Ref):
            if expr.ref_kind == REF_BINDER or (expr.name in env and expr.ref_kind != REF_DECISION):
                return Const(env[expr.name])
            if expr.name in self.scalars:
                return Var(self.scalars[expr.name])
            raise FlattenError(f"'{expr.name}' is not a scalar decision variable in a grounded specification")
        if isinstance(expr, Unary):
            if expr.op == "|":
                return _app("add", *self.set_value(expr.operand, env).values())
            operand = self.scalar(expr.operand, env)
            if expr.op == "-":
                return _app("neg", operand)
            if expr.op == "!":
                return _app("not", operand)
            return operand
        if isinstance(expr, Binary):
            return self.binary(expr, env)
        if isinstance(expr, Quantifier):
            return self.quantifier(expr, env)
        raise FlattenError(f"cannot lower {expr.kind}")

    def binary(self, expr: Binary, env: dict[str, int]) -> Term:
        op = expr.op
        if op == "in":
            return self.membership(expr, env)
        if op == "subsetEq":
            left = self.set_value(expr.left, env)
            right = self.set_value(expr.right, env)
            parts = [_app("imp", member, right.get(row, FALSE)) for row, member in left.items()]
            return _app("and", *parts)
        left = self.scalar(expr.left, env)
        right = self.scalar(expr.right, env)
        if op == "+":
            return _app("add", left, right)
        if op in ("-", "*", "/", "%"):
            return _app(op, left, right)
        if op in ("=", "!=", "<", "<=", ">", ">="):
            return _compare(op, left, right)
        return _app({"/\\": "and", "\\/": "or", "->": "imp", "<->": "iff"}[op], left, right)

    def membership(self, expr: Binary, env: dict[str, int]) -> Term:
        members = self.set_value(expr.right, env)
        items = expr.left.items if isinstance(expr.left, TupleLit) else (expr.left,)
        parts = [self.scalar(item, env) for item in items]
        if all(isinstance(p, Const) for p in parts):
            return members.get(tuple(p.value for p in parts), FALSE)  # type: ignore[union-attr]
        options = []
        for row, member in members.items():
            if len(row) != len(parts):
                continue
            equalities = [_compare("=", part, Const(value)) for part, value in zip(parts, row)]
            options.append(_app("and", *equalities, member))
        return _app("or", *options)

    def set_value(self, expr: Expr, env: dict[str, int]) -> SetMap:
        if isinstance(expr, RelationLit):
            return {row: TRUE for row in expr.tuples}
        if isinstance(expr, Ref) and expr.name in self.sets:
            return self.sets[expr.name]
        raise FlattenError(f"'{getattr(expr, 'name', expr.kind)}' is not a set in a grounded specification")

    def quantifier(self, expr: Quantifier, env: dict[str, int]) -> Term:
        combine = {"forAll": "and", "exists": "or", "sum": "add"}[expr.quant]
        guard_op = {"forAll": "guard_imp", "exists": "guard_and", "sum": "guard_mul"}[expr.quant]
        parts: list[Term] = []
        if isinstance(expr.range, DOMAIN_TYPES):
            for value in _binder_values(expr.range, env):
                parts.append(self.scalar(expr.body, {**env, expr.binder: value}))
            return _app(combine, *parts)
        for row, member in sorted(self.set_value(expr.range, env).items()):
            body = self.scalar(expr.body, {**env, expr.binder: row[0]})
            if member == TRUE:
                parts.append(body)
            elif member != FALSE:
                parts.append(_guard(guard_op, member, body))
        return _app(combine, *parts)


def _guard(op: str, guard: Term, body: Term) -> Term:
    if isinstance(body, Const):
        if op == "guard_imp" and body.value == 1:
            return TRUE
        if op == "guard_and" and body.value == 0:
            return FALSE
        if op == "guard_mul" and body.value == 0:
            return Const(0)
    if op == "guard_and" and isinstance(body, Const):
        return guard
    return App(op, (guard, body))


def _bounds(domain: Domain, owner: str) -> tuple[int, int]:
    if isinstance(domain, BoolDomain):
        return 0, 1
    if not isinstance(domain, IntDomain) or not isinstance(domain.lo, IntLit) or not isinstance(domain.hi, IntLit):
        raise FlattenError(f"domain of '{owner}' is not grounded")
    return domain.lo.value, domain.hi.value


def _value_range(domain: Domain, owner: str = "quantifier") -> range:
    lo, hi = _bounds(domain, owner)
    return range(lo, hi + 1)


def _binder_values(domain: Domain, env: dict[str, int]) -> list[int]:
    # Bounds may mention enclosing binders.
    if isinstance(domain, RelationDomain):
        raise FlattenError("quantifiers range over bool or int domains, or over sets")
    try:
        return [int(value) for value in domain_values(domain, env)]
    except EvaluationError as exc:
        raise FlattenError(f"quantifier domain cannot be enumerated: {exc.message}") from exc


def flatten(ast: SpecAst, *, cap: int | None = None) -> GroundCsp:
    """Lower a grounded specification; raises ``FlattenError`` on leftovers or oversized domains."""
    lowering = _Lowering(resolve_flatten_cap(cap))
    for statement in ast.statements:
        if isinstance(statement, FindStmt):
            lowering.declare(statement)
        elif isinstance(statement, SuchThatStmt):
            for expr in statement.exprs:
                lowering.post(lowering.scalar(expr, {}))
        elif isinstance(statement, ObjectiveStmt):
            lowering.csp.objective = (statement.direction, lowering.scalar(statement.expr, {}))
        else:
            raise FlattenError(f"{statement.kind} must be removed by grounding before flattening")
    csp = lowering.csp
    LOG.debug(
        "flattened to %d variables, %d constraints, %d attribute constraints",
        len(csp.variables),
        len(csp.constraints),
        len(csp.attr_constraints),
    )
    return csp
