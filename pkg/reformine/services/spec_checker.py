from __future__ import annotations

from dataclasses import dataclass

from reformine.domain.ast import (
    ARITHMETIC_OPS,
    DOMAIN_TYPES,
    LOGIC_OPS,
    REF_BINDER,
    REF_DECISION,
    REF_LETTING,
    REF_PARAMETER,
    Attribute,
    Binary,
    BoolDomain,
    BoolLit,
    Domain,
    DomainRef,
    Expr,
    FindStmt,
    GivenStmt,
    IntDomain,
    IntLit,
    LettingStmt,
    ObjectiveStmt,
    Position,
    Quantifier,
    Ref,
    RelationDomain,
    RelationLit,
    SpecAst,
    SuchThatStmt,
    TupleLit,
    Unary,
    WhereStmt,
)
from reformine.domain.errors import ReformineError
from reformine.domain.models import ValidationReport


# Expression types: ("int",), ("bool",), ("rel", arity) and ("tuple", arity).
# Arity 0 on a relation is the empty literal and unifies with any arity.
INT = ("int",)
BOOL = ("bool",)
DOMAIN_ALIAS = "domain"

ExprType = tuple | None
TypedExpr = tuple[Expr, ExprType]
TypedDomain = tuple[Domain, ExprType]


class SpecCheckError(ReformineError):
    """Raised when a parsed specification fails resolution or type checking."""

    def __init__(
        self,
        message: str,
        *,
        code: str,
        report: ValidationReport | None = None,
        source: str | None = None,
        line: int | None = None,
        column: int | None = None,
    ) -> None:
        super().__init__(message, source=source, line=line, column=column)
        self.code = code
        self.report = report or ValidationReport()

    @classmethod
    def single(
        cls,
        code: str,
        message: str,
        *,
        source: str | None = None,
        position: Position = None,
    ) -> "SpecCheckError":
        report = ValidationReport()
        report.add("blocking", code, message, position=position)
        line, column = position if position is not None else (None, None)
        return cls(message, code=code, report=report, source=source, line=line, column=column)


@dataclass(slots=True)
class _Symbol:
    kind: str
    type: ExprType
    domain: object = None


def describe(type_: ExprType) -> str:
    if type_ is None:
        return "unknown"
    if type_[0] in ("rel", "tuple"):
        return f"{type_[0]}/{type_[1]}"
    return type_[0]


def _arity_compatible(a: int, b: int) -> bool:
    return a == 0 or b == 0 or a == b


class _Checker:
    def __init__(self) -> None:
        self.report = ValidationReport()
        self.symbols: dict[str, _Symbol] = {}
        self.position: Position = None

    def fail(self, code: str, message: str, position: Position = None) -> None:
        self.report.add("blocking", code, message, position=position or self.position)

    # statements

    def run(self, ast: SpecAst) -> SpecAst:
        statements = []
        objective_seen = False
        for statement in ast.statements:
            self.position = statement.pos
            if isinstance(statement, GivenStmt):
                domain, type_ = self.domain(statement.domain, self.symbols, allow_unbounded=True)
                for name in statement.names:
                    self.declare(name, _Symbol(REF_PARAMETER, type_, self.underlying(domain)))
                statements.append(GivenStmt(statement.names, domain, statement.pos))
            elif isinstance(statement, LettingStmt):
                statements.append(self.letting(statement))
            elif isinstance(statement, WhereStmt):
                expr, type_ = self.expr(statement.expr, self.symbols, constant=True)
                self.expect(type_, BOOL, "where clause")
                statements.append(WhereStmt(expr, statement.pos))
            elif isinstance(statement, FindStmt):
                domain, type_ = self.domain(statement.domain, self.symbols, allow_unbounded=True)
                self.declare(statement.name, _Symbol(REF_DECISION, type_, self.underlying(domain)))
                statements.append(FindStmt(statement.name, domain, statement.pos))
            elif isinstance(statement, SuchThatStmt):
                exprs = []
                for raw in statement.exprs:
                    expr, type_ = self.expr(raw, self.symbols, constant=False)
                    self.expect(type_, BOOL, "constraint")
                    exprs.append(expr)
                statements.append(SuchThatStmt(tuple(exprs), statement.pos))
            elif isinstance(statement, ObjectiveStmt):
                if objective_seen:
                    self.fail("MULTIPLE_OBJECTIVES", "a specification may have at most one objective")
                objective_seen = True
                expr, type_ = self.expr(statement.expr, self.symbols, constant=False)
                self.expect(type_, INT, "objective")
                statements.append(ObjectiveStmt(statement.direction, expr, statement.pos))
        return SpecAst(tuple(statements))

    def letting(self, statement: LettingStmt) -> LettingStmt:
        if isinstance(statement.value, DOMAIN_TYPES):
            domain, type_ = self.domain(statement.value, self.symbols, allow_unbounded=False)
            self.declare(statement.name, _Symbol(DOMAIN_ALIAS, type_, self.underlying(domain)))
            return LettingStmt(statement.name, domain, statement.pos)
        expr, type_ = self.expr(statement.value, self.symbols, constant=True)
        if type_ is not None and type_ not in (INT, BOOL):
            self.fail(
                "TYPE_MISMATCH",
                f"letting '{statement.name}' must be int or bool, got {describe(type_)}",
            )
        self.declare(statement.name, _Symbol(REF_LETTING, type_))
        return LettingStmt(statement.name, expr, statement.pos)

    def declare(self, name: str, symbol: _Symbol) -> None:
        if name in self.symbols:
            self.fail("DUPLICATE_DECLARATION", f"'{name}' is already declared")
            return
        self.symbols[name] = symbol

    def expect(self, actual: ExprType, wanted: tuple, what: str) -> None:
        if actual is not None and actual != wanted:
            self.fail("TYPE_MISMATCH", f"{what} must be {describe(wanted)}, got {describe(actual)}")

    # domains

    def underlying(self, domain: object) -> object:
        if isinstance(domain, DomainRef):
            symbol = self.symbols.get(domain.name)
            return symbol.domain if symbol is not None else None
        return domain

    def domain(self, domain: Domain, scope: dict[str, _Symbol], *, allow_unbounded: bool) -> TypedDomain:
        if isinstance(domain, BoolDomain):
            return domain, BOOL
        if isinstance(domain, IntDomain):
            lo, lo_type = self.expr(domain.lo, scope, constant=True)
            self.expect(lo_type, INT, "domain bound")
            hi = None
            if domain.hi is not None:
                hi, hi_type = self.expr(domain.hi, scope, constant=True)
                self.expect(hi_type, INT, "domain bound")
            elif not allow_unbounded:
                self.fail("DOMAIN_ATTRIBUTE", "domain aliases must have an upper bound")
            return IntDomain(lo, hi), INT
        if isinstance(domain, DomainRef):
            symbol = scope.get(domain.name)
            if symbol is None:
                self.fail("UNRESOLVED_IDENTIFIER", f"unknown domain '{domain.name}'", domain.pos)
                return domain, None
            if symbol.kind != DOMAIN_ALIAS:
                self.fail("TYPE_MISMATCH", f"'{domain.name}' is not a domain", domain.pos)
                return domain, None
            return domain, symbol.type
        if isinstance(domain, RelationDomain):
            return self.relation_domain(domain, scope, allow_unbounded=allow_unbounded)
        self.fail("TYPE_MISMATCH", f"expected a domain, got {domain.kind}")
        return domain, None

    def relation_domain(
        self, domain: RelationDomain, scope: dict[str, _Symbol], *, allow_unbounded: bool
    ) -> TypedDomain:
        names = [a.name for a in domain.attrs]
        if len(set(names)) != len(names):
            self.fail("DOMAIN_ATTRIBUTE", "a domain attribute is given twice")
        if "size" in names and ("minSize" in names or "maxSize" in names):
            self.fail("DOMAIN_ATTRIBUTE", "size excludes minSize and maxSize")
        attrs = []
        for attribute in domain.attrs:
            value, type_ = self.expr(attribute.value, scope, constant=True)
            self.expect(type_, INT, f"attribute {attribute.name}")
            attrs.append(Attribute(attribute.name, value))
        components = []
        for component in domain.components:
            checked, type_ = self.domain(component, scope, allow_unbounded=allow_unbounded)
            base = self.underlying(checked)
            if isinstance(base, RelationDomain):
                self.fail("NESTED_RELATION", "relations of relations are not supported")
            elif type_ is not None and type_ != INT:
                self.fail("TYPE_MISMATCH", f"relation components must be int domains, got {describe(type_)}")
            components.append(checked)
        rebuilt = RelationDomain(tuple(components), tuple(attrs), domain.is_set)
        return rebuilt, ("rel", domain.arity)

    # expressions

    def expr(self, expr: Expr, scope: dict[str, _Symbol], *, constant: bool) -> TypedExpr:
        if isinstance(expr, IntLit):
            return expr, INT
        if isinstance(expr, BoolLit):
            return expr, BOOL
        if isinstance(expr, RelationLit):
            return expr, ("rel", expr.arity)
        if isinstance(expr, Ref):
            return self.ref(expr, scope, constant=constant)
        if isinstance(expr, Unary):
            return self.unary(expr, scope, constant=constant)
        if isinstance(expr, Binary):
            return self.binary(expr, scope, constant=constant)
        if isinstance(expr, TupleLit):
            self.fail("TYPE_MISMATCH", "tuple literals may only appear on the left of 'in'")
            return expr, None
        if isinstance(expr, Quantifier):
            return self.quantifier(expr, scope, constant=constant)
        self.fail("TYPE_MISMATCH", f"expected an expression, got {expr.kind}")
        return expr, None

    def ref(self, expr: Ref, scope: dict[str, _Symbol], *, constant: bool) -> TypedExpr:
        symbol = scope.get(expr.name)
        if symbol is None:
            self.fail("UNRESOLVED_IDENTIFIER", f"unresolved identifier '{expr.name}'", expr.pos)
            return expr, None
        if symbol.kind == DOMAIN_ALIAS:
            self.fail("TYPE_MISMATCH", f"domain '{expr.name}' used as a value", expr.pos)
            return expr, None
        if constant and symbol.kind == REF_DECISION:
            self.fail(
                "NOT_CONSTANT",
                f"decision variable '{expr.name}' cannot appear in a constant expression",
                expr.pos,
            )
        return Ref(expr.name, symbol.kind, expr.pos), symbol.type

    def unary(self, expr: Unary, scope: dict[str, _Symbol], *, constant: bool) -> TypedExpr:
        operand, type_ = self.expr(expr.operand, scope, constant=constant)
        rebuilt = Unary(expr.op, operand)
        if expr.op == "-":
            self.expect(type_, INT, "operand of '-'")
            return rebuilt, INT
        if expr.op == "!":
            self.expect(type_, BOOL, "operand of '!'")
            return rebuilt, BOOL
        if expr.op == "toInt":
            self.expect(type_, BOOL, "operand of toInt")
            return rebuilt, INT
        if type_ is not None and type_[0] != "rel":
            self.fail("TYPE_MISMATCH", f"cardinality needs a set or relation, got {describe(type_)}")
        return rebuilt, INT

    def binary(self, expr: Binary, scope: dict[str, _Symbol], *, constant: bool) -> TypedExpr:
        op = expr.op
        if op == "in":
            return self.membership(expr, scope, constant=constant)
        left, left_type = self.expr(expr.left, scope, constant=constant)
        right, right_type = self.expr(expr.right, scope, constant=constant)
        rebuilt = Binary(op, left, right)
        if op in ARITHMETIC_OPS:
            self.expect(left_type, INT, f"left operand of '{op}'")
            self.expect(right_type, INT, f"right operand of '{op}'")
            return rebuilt, INT
        if op in LOGIC_OPS:
            self.expect(left_type, BOOL, f"left operand of '{op}'")
            self.expect(right_type, BOOL, f"right operand of '{op}'")
            return rebuilt, BOOL
        if op in ("=", "!="):
            if left_type is not None and right_type is not None:
                if left_type != right_type or left_type not in (INT, BOOL):
                    self.fail(
                        "TYPE_MISMATCH",
                        f"'{op}' compares {describe(left_type)} with {describe(right_type)}",
                    )
            return rebuilt, BOOL
        if op == "subsetEq":
            for side, type_ in (("left", left_type), ("right", right_type)):
                if type_ is not None and type_[0] != "rel":
                    self.fail("TYPE_MISMATCH", f"{side} operand of subsetEq must be a set or relation")
            if (
                left_type is not None
                and right_type is not None
                and left_type[0] == right_type[0] == "rel"
                and not _arity_compatible(left_type[1], right_type[1])
            ):
                self.fail("TYPE_MISMATCH", "subsetEq operands have different arities")
            return rebuilt, BOOL
        self.expect(left_type, INT, f"left operand of '{op}'")
        self.expect(right_type, INT, f"right operand of '{op}'")
        return rebuilt, BOOL

    def membership(self, expr: Binary, scope: dict[str, _Symbol], *, constant: bool) -> TypedExpr:
        if isinstance(expr.left, TupleLit):
            items = []
            for item in expr.left.items:
                checked, type_ = self.expr(item, scope, constant=constant)
                self.expect(type_, INT, "tuple element")
                items.append(checked)
            left = TupleLit(tuple(items))
            left_arity: int | None = len(items)
        else:
            left, left_type = self.expr(expr.left, scope, constant=constant)
            self.expect(left_type, INT, "left operand of 'in'")
            left_arity = 1 if left_type == INT else None
        right, right_type = self.expr(expr.right, scope, constant=constant)
        if right_type is not None:
            if right_type[0] != "rel":
                self.fail("TYPE_MISMATCH", f"right operand of 'in' must be a set or relation, got {describe(right_type)}")
            elif left_arity is not None and not _arity_compatible(left_arity, right_type[1]):
                self.fail("TYPE_MISMATCH", f"membership of a {left_arity}-tuple in a relation of arity {right_type[1]}")
        return Binary("in", left, right), BOOL

    def quantifier(self, expr: Quantifier, scope: dict[str, _Symbol], *, constant: bool) -> TypedExpr:
        if isinstance(expr.range, DOMAIN_TYPES):
            range_, type_ = self.domain(expr.range, scope, allow_unbounded=False)
            base = self.underlying(range_)
            if type_ is not None and type_ not in (INT, BOOL):
                self.fail("TYPE_MISMATCH", "quantifier domains must be int or bool", expr.pos)
            binder = _Symbol(REF_BINDER, type_, base)
        else:
            range_, type_ = self.expr(expr.range, scope, constant=constant)
            if type_ is not None and (type_[0] != "rel" or type_[1] > 1):
                self.fail(
                    "TYPE_MISMATCH",
                    f"quantification 'in' ranges over sets of int, got {describe(type_)}",
                    expr.pos,
                )
            element = None
            if isinstance(range_, Ref) and range_.name in scope:
                collection = scope[range_.name].domain
                if isinstance(collection, RelationDomain) and collection.arity == 1:
                    element = self.underlying(collection.components[0])
            binder = _Symbol(REF_BINDER, INT, element)
        inner = dict(scope)
        inner[expr.binder] = binder
        body, body_type = self.expr(expr.body, inner, constant=constant)
        rebuilt = Quantifier(expr.quant, expr.binder, range_, body, expr.pos)
        if expr.quant == "sum":
            self.expect(body_type, INT, "sum body")
            return rebuilt, INT
        self.expect(body_type, BOOL, f"{expr.quant} body")
        return rebuilt, BOOL


class SpecCheckService:
    """Resolves identifiers to their declarations and type-checks a parsed specification."""

    def check(self, ast: SpecAst) -> ValidationReport:
        checker = _Checker()
        checker.run(ast)
        return checker.report

    def resolve(self, ast: SpecAst, *, source: str | None = None) -> SpecAst:
        checker = _Checker()
        resolved = checker.run(ast)
        finding = checker.report.first_blocking()
        if finding is not None:
            raise SpecCheckError(
                finding.message,
                code=finding.code,
                report=checker.report,
                source=source,
                line=finding.line,
                column=finding.column,
            )
        return resolved
