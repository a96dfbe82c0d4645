"""Canonical surface printing and the annotated tree dump.

Parentheses are emitted only where the grammar's precedence would otherwise
regroup the operands; arithmetic operators are printed without surrounding
spaces (``1*(2+3)*4 = x``), everything else with single spaces.
"""

from __future__ import annotations

from reformine.domain.ast import (
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
    Node,
    ObjectiveStmt,
    Quantifier,
    Ref,
    RelationDomain,
    RelationLit,
    SpecAst,
    Statement,
    SuchThatStmt,
    TupleLit,
    Unary,
    WhereStmt,
    DOMAIN_TYPES,
    ARITHMETIC_OPS,
)

INDENT = "    "

_BINARY_PRECEDENCE = {
    "<->": 1,
    "->": 2,
    "\\/": 3,
    "/\\": 4,
    "=": 5,
    "!=": 5,
    "<": 5,
    "<=": 5,
    ">": 5,
    ">=": 5,
    "in": 5,
    "subsetEq": 5,
    "+": 6,
    "-": 6,
    "*": 7,
    "/": 7,
    "%": 7,
}
_UNARY_PRECEDENCE = 8
_ATOM_PRECEDENCE = 9
_QUANTIFIER_PRECEDENCE = 0
_NON_ASSOCIATIVE = 5


def _precedence(expr: Expr) -> int:
    if isinstance(expr, Binary):
        return _BINARY_PRECEDENCE[expr.op]
    if isinstance(expr, Quantifier):
        return _QUANTIFIER_PRECEDENCE
    if isinstance(expr, Unary) and expr.op in ("-", "!"):
        return _UNARY_PRECEDENCE
    if isinstance(expr, IntLit) and expr.value < 0:
        return _UNARY_PRECEDENCE
    return _ATOM_PRECEDENCE


def _wrap(text: str, needed: bool) -> str:
    return f"({text})" if needed else text


def pretty_expr(expr: Expr) -> str:
    if isinstance(expr, IntLit):
        return str(expr.value)
    if isinstance(expr, BoolLit):
        return expr.token
    if isinstance(expr, Ref):
        return expr.name
    if isinstance(expr, TupleLit):
        return "(" + ", ".join(pretty_expr(item) for item in expr.items) + ")"
    if isinstance(expr, RelationLit):
        if expr.arity == 1:
            return "{" + ", ".join(str(row[0]) for row in expr.tuples) + "}"
        rows = ("(" + ", ".join(str(v) for v in row) + ")" for row in expr.tuples)
        return "{" + ", ".join(rows) + "}"
    if isinstance(expr, Unary):
        if expr.op == "toInt":
            return f"toInt({pretty_expr(expr.operand)})"
        if expr.op == "|":
            return f"|{pretty_expr(expr.operand)}|"
        inner = pretty_expr(expr.operand)
        return expr.op + _wrap(inner, _precedence(expr.operand) < _UNARY_PRECEDENCE)
    if isinstance(expr, Binary):
        level = _BINARY_PRECEDENCE[expr.op]
        left_level = _precedence(expr.left)
        right_level = _precedence(expr.right)
        right_assoc = expr.op == "->"
        left_parens = left_level < level or (
            left_level == level and (level == _NON_ASSOCIATIVE or right_assoc)
        )
        right_parens = right_level < level or (right_level == level and not right_assoc)
        left = _wrap(pretty_expr(expr.left), left_parens)
        right = _wrap(pretty_expr(expr.right), right_parens)
        if expr.op in ARITHMETIC_OPS:
            return f"{left}{expr.op}{right}"
        return f"{left} {expr.op} {right}"
    if isinstance(expr, Quantifier):
        if isinstance(expr.range, DOMAIN_TYPES):
            head = f"{expr.quant} {expr.binder} : {pretty_domain(expr.range)}"
        else:
            head = f"{expr.quant} {expr.binder} in {pretty_expr(expr.range)}"
        return f"{head} . {pretty_expr(expr.body)}"
    raise TypeError(f"cannot print {type(expr).__name__} as an expression")


def pretty_domain(domain: Domain) -> str:
    if isinstance(domain, BoolDomain):
        return "bool"
    if isinstance(domain, IntDomain):
        hi = "" if domain.hi is None else pretty_expr(domain.hi)
        return f"int({pretty_expr(domain.lo)}..{hi})"
    if isinstance(domain, DomainRef):
        return domain.name
    if isinstance(domain, RelationDomain):
        attrs = ""
        if domain.attrs:
            attrs = " (" + ", ".join(f"{a.name} {pretty_expr(a.value)}" for a in domain.attrs) + ")"
        if domain.is_set:
            return f"set{attrs} of {pretty_domain(domain.components[0])}"
        components = " * ".join(pretty_domain(c) for c in domain.components)
        return f"relation{attrs} of ({components})"
    raise TypeError(f"cannot print {type(domain).__name__} as a domain")


def _statement_lines(statement: Statement) -> list[str]:
    if isinstance(statement, GivenStmt):
        return [f"given {', '.join(statement.names)} : {pretty_domain(statement.domain)}"]
    if isinstance(statement, LettingStmt):
        if isinstance(statement.value, DOMAIN_TYPES):
            return [f"letting {statement.name} be domain {pretty_domain(statement.value)}"]
        return [f"letting {statement.name} be {pretty_expr(statement.value)}"]
    if isinstance(statement, WhereStmt):
        return [f"where {pretty_expr(statement.expr)}"]
    if isinstance(statement, FindStmt):
        return [f"find {statement.name} : {pretty_domain(statement.domain)}"]
    if isinstance(statement, SuchThatStmt):
        body = [INDENT + pretty_expr(expr) for expr in statement.exprs]
        for index in range(len(body) - 1):
            body[index] += ","
        return ["such that", *body]
    if isinstance(statement, ObjectiveStmt):
        return [f"{statement.direction} {pretty_expr(statement.expr)}"]
    raise TypeError(f"cannot print {type(statement).__name__} as a statement")


def annotate(root: Node) -> str:
    """Box-drawing dump of the tree with ``#Kind`` tags on every node."""
    lines: list[str] = []

    def visit(node: Node, prefix: str, last: bool) -> None:
        connector = "└─ " if last else "├─ "
        lines.append(f"{prefix}{connector}{node.token}  #{node.kind}")
        children = node.children()
        child_prefix = prefix + ("   " if last else "│  ")
        for index, child in enumerate(children):
            visit(child, child_prefix, index == len(children) - 1)

    visit(root, "", True)
    return "\n".join(lines) + "\n"


def pretty(ast: SpecAst, *, annotated: bool = False) -> str:
    if annotated:
        return annotate(ast)
    lines: list[str] = []
    for statement in ast.statements:
        lines.extend(_statement_lines(statement))
    return "\n".join(lines) + "\n" if lines else ""
