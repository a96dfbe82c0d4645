from __future__ import annotations

import logging
import math
from collections.abc import Mapping

from reformine.domain.ast import (
    REF_LETTING,
    REF_PARAMETER,
    Attribute,
    BoolDomain,
    Domain,
    DomainRef,
    Expr,
    FindStmt,
    GivenStmt,
    IntDomain,
    IntLit,
    LettingStmt,
    Node,
    ObjectiveStmt,
    Position,
    Ref,
    RelationDomain,
    SpecAst,
    SuchThatStmt,
    Unary,
    WhereStmt,
    DOMAIN_TYPES,
    transform,
)
from reformine.domain.errors import ReformineError
from reformine.domain.models import Instance
from reformine.services.evaluator import (
    EvaluationError,
    UndefinedArithmetic,
    Value,
    contains,
    evaluate,
    free_names,
    to_literal,
)
from reformine.services.spec_printer import pretty_domain, pretty_expr


LOG = logging.getLogger(__name__)


class GroundingError(ReformineError):
    """Raised when an instance cannot be substituted into a specification."""


def _error(message: str, position: Position, source: str | None) -> GroundingError:
    line, column = position if position is not None else (None, None)
    return GroundingError(message, source=source, line=line, column=column)


class _Grounder:
    def __init__(self, instance: Instance, source: str | None) -> None:
        self.bindings: dict[str, Value] = dict(instance.bindings)
        self.source = source
        self.env: dict[str, Value] = {}
        self.aliases: dict[str, Domain] = {}
        self.position: Position = None

    def fail(self, message: str) -> GroundingError:
        return _error(message, self.position, self.source)

    def value(self, expr: Expr, what: str) -> Value:
        try:
            return evaluate(expr, self.env)
        except UndefinedArithmetic as exc:
            raise self.fail(f"{exc.message} while evaluating {what} '{pretty_expr(expr)}'") from exc
        except EvaluationError as exc:
            raise self.fail(f"cannot evaluate {what} '{pretty_expr(expr)}': {exc.message}") from exc

    def int_value(self, expr: Expr, what: str) -> int:
        value = self.value(expr, what)
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.fail(f"{what} '{pretty_expr(expr)}' is not an integer")
        return value

    def run(self, ast: SpecAst) -> SpecAst:
        declared = {name for given in ast.givens() for name in given.names}
        unknown = sorted(set(self.bindings) - declared)
        if unknown:
            raise _error(f"instance binds unknown given '{unknown[0]}'", None, self.source)
        statements = []
        for statement in ast.statements:
            self.position = statement.pos
            if isinstance(statement, GivenStmt):
                self.bind_given(statement)
            elif isinstance(statement, LettingStmt):
                if isinstance(statement.value, DOMAIN_TYPES):
                    self.aliases[statement.name] = self.domain(statement.value, bounded=False)
                else:
                    self.env[statement.name] = self.value(
                        self.substitute(statement.value), f"letting {statement.name}"
                    )
            elif isinstance(statement, WhereStmt):
                if self.value(self.substitute(statement.expr), "where clause") is not True:
                    raise self.fail(f"where clause violated: {pretty_expr(statement.expr)}")
            elif isinstance(statement, FindStmt):
                domain = self.domain(statement.domain, bounded=True, owner=statement.name)
                statements.append(FindStmt(statement.name, domain, statement.pos))
            elif isinstance(statement, SuchThatStmt):
                exprs = tuple(self.substitute(expr) for expr in statement.exprs)
                statements.append(SuchThatStmt(exprs, statement.pos))
            elif isinstance(statement, ObjectiveStmt):
                statements.append(
                    ObjectiveStmt(statement.direction, self.substitute(statement.expr), statement.pos)
                )
        LOG.debug("grounded %d statements into %d", len(ast.statements), len(statements))
        return SpecAst(tuple(statements))

    def bind_given(self, statement: GivenStmt) -> None:
        domain = self.domain(statement.domain, bounded=False, owner=", ".join(statement.names))
        for name in statement.names:
            if name not in self.bindings:
                raise self.fail(f"instance has no value for given '{name}'")
            value = self.bindings[name]
            if not contains(domain, value):
                raise self.fail(f"value of given '{name}' lies outside its domain {pretty_domain(domain)}")
            self.env[name] = value

    def domain(self, domain: Domain, *, bounded: bool, owner: str | None = None) -> Domain:
        if isinstance(domain, BoolDomain):
            return domain
        if isinstance(domain, DomainRef):
            alias = self.aliases[domain.name]
            return self.domain(alias, bounded=True, owner=owner) if bounded else alias
        if isinstance(domain, IntDomain):
            lo = self.int_value(domain.lo, "domain bound")
            if domain.hi is None:
                if bounded:
                    raise self.fail(f"find '{owner}' has an unbounded domain")
                return IntDomain(IntLit(lo), None)
            hi = self.int_value(domain.hi, "domain bound")
            if bounded and lo > hi:
                raise self.fail(f"find '{owner}' has the empty domain int({lo}..{hi})")
            return IntDomain(IntLit(lo), IntLit(hi))
        components = tuple(self.domain(c, bounded=bounded, owner=owner) for c in domain.components)
        attrs = []
        for attribute in domain.attrs:
            value = self.int_value(attribute.value, f"attribute {attribute.name}")
            if attribute.name == "minSize":
                value = max(value, 0)
            attrs.append(Attribute(attribute.name, IntLit(value)))
        grounded = RelationDomain(components, tuple(attrs), domain.is_set)
        if bounded:
            capacity = math.prod(
                c.hi.value - c.lo.value + 1 if c.hi.value >= c.lo.value else 0 for c in components
            )
            max_size = grounded.attr("maxSize")
            if isinstance(max_size, IntLit) and max_size.value > capacity:
                grounded = grounded.with_attr("maxSize", IntLit(capacity))
        return grounded

    def substitute(self, expr: Expr) -> Expr:
        def step(node: Node) -> Node:
            if isinstance(node, Ref) and node.ref_kind in (REF_PARAMETER, REF_LETTING):
                return to_literal(self.env[node.name])
            if isinstance(node, Unary) and node.op == "-" and isinstance(node.operand, IntLit):
                return IntLit(-node.operand.value)
            if isinstance(node, DomainRef):
                return self.aliases[node.name]
            if isinstance(node, IntDomain) and not free_names(node):
                return self.domain(node, bounded=False)
            return node

        return transform(expr, step)  # type: ignore[return-value]


def ground(ast: SpecAst, instance: Instance | Mapping[str, Value], *, source: str | None = None) -> SpecAst:
    """Substitute an instance into ``ast``, evaluate domains and discharge where clauses."""
    if not isinstance(instance, Instance):
        instance = Instance(bindings=dict(instance))
    return _Grounder(instance, source).run(ast)
