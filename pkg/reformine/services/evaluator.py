from __future__ import annotations

from collections.abc import Mapping
from itertools import product

from reformine.domain.ast import (
    DOMAIN_TYPES,
    Binary,
    BoolDomain,
    BoolLit,
    Domain,
    IntDomain,
    IntLit,
    Node,
    Quantifier,
    Ref,
    RelationDomain,
    RelationLit,
    TupleLit,
    Unary,
    relation_literal,
)
from reformine.domain.errors import ReformineError


Value = int | bool | frozenset


class EvaluationError(ReformineError):
    """Raised when a constant expression cannot be evaluated."""


class UndefinedArithmetic(EvaluationError):
    """Raised on division or modulo by zero."""


def free_names(expr: Node, bound: frozenset[str] = frozenset()) -> set[str]:
    """Names referenced by ``expr`` that are not bound by an enclosing quantifier inside it."""
    if isinstance(expr, Ref):
        return set() if expr.name in bound else {expr.name}
    if isinstance(expr, Quantifier):
        names = free_names(expr.range, bound)
        return names | free_names(expr.body, bound | {expr.binder})
    names: set[str] = set()
    for child in expr.children():
        names |= free_names(child, bound)
    return names


def is_closed(expr: Node) -> bool:
    return not free_names(expr)


def divide(op: str, left: int, right: int) -> int:
    if right == 0:
        raise UndefinedArithmetic(f"{'division' if op == '/' else 'modulo'} by zero")
    return left // right if op == "/" else left % right


def arithmetic(op: str, left: int, right: int) -> int:
    if op == "+":
        return left + right
    if op == "-":
        return left - right
    if op == "*":
        return left * right
    return divide(op, left, right)


def compare(op: str, left: Value, right: Value) -> bool:
    if op == "=":
        return left == right
    if op == "!=":
        return left != right
    if op == "<":
        return left < right
    if op == "<=":
        return left <= right
    if op == ">":
        return left > right
    return left >= right


def logic(op: str, left: bool, right: bool) -> bool:
    if op == "/\\":
        return left and right
    if op == "\\/":
        return left or right
    if op == "->":
        return (not left) or right
    return left == right


def domain_values(domain: Domain, env: Mapping[str, Value] | None = None) -> list[bool | int | tuple[int, ...]]:
    """Enumerate a bool, int or relation domain in ascending order."""
    env = env or {}
    if isinstance(domain, BoolDomain):
        return [False, True]
    if isinstance(domain, IntDomain):
        if domain.hi is None:
            raise EvaluationError("cannot enumerate an unbounded integer domain")
        lo = _as_int(evaluate(domain.lo, env))
        hi = _as_int(evaluate(domain.hi, env))
        return list(range(lo, hi + 1))
    if isinstance(domain, RelationDomain):
        return [tuple(row) for row in product(*(domain_values(c, env) for c in domain.components))]
    raise EvaluationError(f"cannot enumerate domain {domain.kind}")


def contains(domain: Domain, value: Value, env: Mapping[str, Value] | None = None) -> bool:
    """Membership of a given's value in its declared (grounded or parameterised) domain."""
    env = env or {}
    if isinstance(domain, BoolDomain):
        return isinstance(value, bool)
    if isinstance(domain, IntDomain):
        if isinstance(value, bool) or not isinstance(value, int):
            return False
        if value < _as_int(evaluate(domain.lo, env)):
            return False
        return domain.hi is None or value <= _as_int(evaluate(domain.hi, env))
    if isinstance(domain, RelationDomain):
        if not isinstance(value, frozenset):
            return False
        for row in value:
            if len(row) != domain.arity:
                return False
            if not all(contains(c, v, env) for c, v in zip(domain.components, row)):
                return False
        size = len(value)
        for attribute in domain.attrs:
            bound = _as_int(evaluate(attribute.value, env))
            if attribute.name == "size" and size != bound:
                return False
            if attribute.name == "minSize" and size < bound:
                return False
            if attribute.name == "maxSize" and size > bound:
                return False
        return True
    raise EvaluationError(f"cannot test membership in domain {domain.kind}")


def _as_int(value: Value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise EvaluationError(f"expected an integer, got {value!r}")
    return value


def _as_bool(value: Value) -> bool:
    if not isinstance(value, bool):
        raise EvaluationError(f"expected a boolean, got {value!r}")
    return value


def _as_relation(value: Value) -> frozenset:
    if not isinstance(value, frozenset):
        raise EvaluationError(f"expected a set or relation, got {value!r}")
    return value


def evaluate(expr: Node, env: Mapping[str, Value] | None = None) -> Value:
    """Evaluate a closed expression (or one closed under ``env``)."""
    env = env or {}
    if isinstance(expr, IntLit):
        return expr.value
    if isinstance(expr, BoolLit):
        return expr.value
    if isinstance(expr, RelationLit):
        return frozenset(expr.tuples)
    if isinstance(expr, Ref):
        if expr.name not in env:
            raise EvaluationError(f"'{expr.name}' has no value")
        return env[expr.name]
    if isinstance(expr, TupleLit):
        return tuple(_as_int(evaluate(item, env)) for item in expr.items)
    if isinstance(expr, Unary):
        operand = evaluate(expr.operand, env)
        if expr.op == "-":
            return -_as_int(operand)
        if expr.op == "!":
            return not _as_bool(operand)
        if expr.op == "toInt":
            return int(_as_bool(operand))
        return len(_as_relation(operand))
    if isinstance(expr, Binary):
        return _evaluate_binary(expr, env)
    if isinstance(expr, Quantifier):
        return _evaluate_quantifier(expr, env)
    raise EvaluationError(f"cannot evaluate {expr.kind}")


def _evaluate_binary(expr: Binary, env: Mapping[str, Value]) -> Value:
    # Both operands are always evaluated; an undefined operand makes the whole
    # expression undefined.
    op = expr.op
    left = evaluate(expr.left, env)
    right = evaluate(expr.right, env)
    if op in ("/\\", "\\/", "->", "<->"):
        return logic(op, _as_bool(left), _as_bool(right))
    if op in ("+", "-", "*", "/", "%"):
        return arithmetic(op, _as_int(left), _as_int(right))
    if op == "in":
        row = left if isinstance(left, tuple) else (_as_int(left),)
        return row in _as_relation(right)
    if op == "subsetEq":
        return _as_relation(left) <= _as_relation(right)
    if op in ("=", "!="):
        return compare(op, left, right)
    return compare(op, _as_int(left), _as_int(right))


def _evaluate_quantifier(expr: Quantifier, env: Mapping[str, Value]) -> Value:
    if isinstance(expr.range, DOMAIN_TYPES):
        values = domain_values(expr.range, env)
    else:
        values = sorted(row[0] for row in _as_relation(evaluate(expr.range, env)))
    scope = dict(env)
    if expr.quant == "sum":
        total = 0
        for value in values:
            scope[expr.binder] = value
            total += _as_int(evaluate(expr.body, scope))
        return total
    results = []
    for value in values:
        scope[expr.binder] = value
        results.append(_as_bool(evaluate(expr.body, scope)))
    return all(results) if expr.quant == "forAll" else any(results)


def to_literal(value: Value) -> IntLit | BoolLit | RelationLit:
    """Literal AST node for an evaluated value."""
    if isinstance(value, bool):
        return BoolLit(value)
    if isinstance(value, int):
        return IntLit(value)
    if isinstance(value, frozenset):
        return relation_literal(set(value))
    raise EvaluationError(f"no literal form for {value!r}")
