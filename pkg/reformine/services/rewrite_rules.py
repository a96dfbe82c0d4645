"""The rewrite rule library.

Every rule enumerates its matches in pre-order over the tree and rewrites one match
at a time. Expression-local rules keep the solution set of every instance exactly;
the implied-sum rule adds an entailed constraint; the strengthening rules move
information from constraints into set and relation attributes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Literal, Mapping

from reformine.domain.ast import (
    COMMUTATIVE_OPS,
    REF_BINDER,
    REF_DECISION,
    Binary,
    BoolDomain,
    BoolLit,
    DomainRef,
    Expr,
    FindStmt,
    GivenStmt,
    IntDomain,
    IntLit,
    LettingStmt,
    Node,
    Path,
    Quantifier,
    Ref,
    RelationDomain,
    RelationLit,
    SpecAst,
    SuchThatStmt,
    Unary,
    node_at,
    replace_at,
    walk,
)
from reformine.services.evaluator import EvaluationError, evaluate, free_names, to_literal


RuleKind = Literal["expression-local", "constraint-derivation", "domain-strengthening"]

_FLIPPED = {"<=": ">=", ">=": "<=", "<": ">", ">": "<", "=": "="}


@dataclass(frozen=True, slots=True)
class Match:
    rule: str
    path: Path
    bindings: Mapping[str, Node] = field(default_factory=dict)


def folded_literal(node: Node) -> IntLit | BoolLit | None:
    """Literal value of a closed compound int or bool expression, if it evaluates."""
    if not isinstance(node, (Unary, Binary, Quantifier)) or free_names(node):
        return None
    try:
        value = evaluate(node)
    except EvaluationError:
        return None
    if isinstance(value, (bool, int)):
        return to_literal(value)
    return None


def identity_operand(node: Node) -> Node | None:
    """The surviving operand when ``node`` is a neutral-element or double-negation form."""
    if isinstance(node, Unary):
        if node.op == "!" and isinstance(node.operand, Unary) and node.operand.op == "!":
            return node.operand.operand
        return None
    if not isinstance(node, Binary):
        return None
    left, right = node.left, node.right
    if node.op == "*":
        if right == IntLit(1):
            return left
        if left == IntLit(1):
            return right
    elif node.op == "+":
        if right == IntLit(0):
            return left
        if left == IntLit(0):
            return right
    elif node.op == "-" and right == IntLit(0):
        return left
    elif node.op == "/" and right == IntLit(1):
        return left
    elif node.op == "/\\":
        if right == BoolLit(True):
            return left
        if left == BoolLit(True):
            return right
    elif node.op == "\\/":
        if right == BoolLit(False):
            return left
        if left == BoolLit(False):
            return right
    return None


def _expression_nodes(ast: SpecAst) -> Iterator[tuple[Path, Node]]:
    """Pre-order (path, node) pairs, skipping the element rows of relation literals."""
    stack: list[tuple[Path, Node]] = [((), ast)]
    while stack:
        path, node = stack.pop()
        yield path, node
        if isinstance(node, RelationLit):
            continue
        children = node.children()
        for ordinal in range(len(children), 0, -1):
            stack.append(((*path, ordinal), children[ordinal - 1]))


def _top_level_constraints(ast: SpecAst) -> Iterator[tuple[Path, Expr]]:
    for s_index, statement in enumerate(ast.statements, start=1):
        if isinstance(statement, SuchThatStmt):
            for c_index, expr in enumerate(statement.exprs, start=1):
                yield (s_index, c_index), expr


def _declared_before(ast: SpecAst, index: int) -> set[str]:
    names: set[str] = set()
    for statement in ast.statements[:index]:
        if isinstance(statement, GivenStmt):
            names.update(statement.names)
        elif isinstance(statement, (LettingStmt, FindStmt)):
            names.add(statement.name)
    return names


def _find_index(ast: SpecAst, name: str) -> int | None:
    for index, statement in enumerate(ast.statements):
        if isinstance(statement, FindStmt) and statement.name == name:
            return index
    return None


def _contains_decision(expr: Node) -> bool:
    return any(isinstance(node, Ref) and node.ref_kind in (REF_DECISION, REF_BINDER) for _, node in walk(expr))


def _remove_constraint(ast: SpecAst, path: Path) -> SpecAst:
    s_index, c_index = path
    statement = ast.statements[s_index - 1]
    assert isinstance(statement, SuchThatStmt)
    exprs = statement.exprs[: c_index - 1] + statement.exprs[c_index:]
    statements = list(ast.statements)
    if exprs:
        statements[s_index - 1] = SuchThatStmt(exprs, statement.pos)
    else:
        del statements[s_index - 1]
    return SpecAst(tuple(statements))


def _replace_find_domain(ast: SpecAst, name: str, domain: RelationDomain) -> SpecAst:
    statements = [
        FindStmt(s.name, domain, s.pos) if isinstance(s, FindStmt) and s.name == name else s
        for s in ast.statements
    ]
    return SpecAst(tuple(statements))


class RewriteRule:
    name: str = ""
    kind: RuleKind = "expression-local"
    soundness: str = ""

    def match(self, ast: SpecAst) -> list[Match]:
        raise NotImplementedError

    def rewrite(self, ast: SpecAst, match: Match) -> SpecAst:
        raise NotImplementedError


class CommuteRule(RewriteRule):
    name = "commute"
    kind = "expression-local"
    soundness = "operands of a commutative operator may be swapped"

    def match(self, ast: SpecAst) -> list[Match]:
        return [
            Match(self.name, path, {"left": node.left, "right": node.right})
            for path, node in _expression_nodes(ast)
            if isinstance(node, Binary) and node.op in COMMUTATIVE_OPS
        ]

    def rewrite(self, ast: SpecAst, match: Match) -> SpecAst:
        node = node_at(ast, match.path)
        assert isinstance(node, Binary)
        return replace_at(ast, match.path, Binary(node.op, node.right, node.left))  # type: ignore[return-value]


class ConstantFoldRule(RewriteRule):
    name = "const-fold"
    kind = "expression-local"
    soundness = "a closed expression equals its value"

    def match(self, ast: SpecAst) -> list[Match]:
        matches: list[Match] = []
        for path, node in _expression_nodes(ast):
            literal = folded_literal(node)
            if literal is not None:
                matches.append(Match(self.name, path, {"value": literal}))
        return matches

    def rewrite(self, ast: SpecAst, match: Match) -> SpecAst:
        return replace_at(ast, match.path, match.bindings["value"])  # type: ignore[return-value]


class IdentityElimRule(RewriteRule):
    name = "identity-elim"
    kind = "expression-local"
    soundness = "neutral elements and double negation can be dropped"

    def match(self, ast: SpecAst) -> list[Match]:
        matches: list[Match] = []
        for path, node in _expression_nodes(ast):
            operand = identity_operand(node)
            if operand is not None:
                matches.append(Match(self.name, path, {"operand": operand}))
        return matches

    def rewrite(self, ast: SpecAst, match: Match) -> SpecAst:
        return replace_at(ast, match.path, match.bindings["operand"])  # type: ignore[return-value]


class ImpliedSumRule(RewriteRule):
    name = "implied-sum"
    kind = "constraint-derivation"
    soundness = (
        "summing a per-element inequality over the range gives an entailed inequality, "
        "also under enclosing universal quantifiers; "
        "strictness survives only when the range is provably non-empty"
    )

    def match(self, ast: SpecAst) -> list[Match]:
        existing = ast.constraints()
        matches: list[Match] = []
        for path, expr in _top_level_constraints(ast):
            if not isinstance(expr, Quantifier) or expr.quant != "forAll":
                continue
            # Only the innermost of a chain of forAll quantifiers is summed.
            outer: list[Quantifier] = []
            inner = expr
            while isinstance(inner.body, Quantifier) and inner.body.quant == "forAll":
                outer.append(inner)
                inner = inner.body
            body = inner.body
            if not isinstance(body, Binary) or body.op not in ("<", "<=", ">", ">="):
                continue
            op = body.op
            if op in ("<", ">") and not _provably_non_empty(ast, inner.range):
                op += "="
            derived: Expr = Binary(
                op,
                Quantifier("sum", inner.binder, inner.range, body.left),
                Quantifier("sum", inner.binder, inner.range, body.right),
            )
            for quantifier in reversed(outer):
                derived = Quantifier("forAll", quantifier.binder, quantifier.range, derived)
            if derived in existing:
                continue
            matches.append(Match(self.name, path, {"derived": derived}))
        return matches

    def rewrite(self, ast: SpecAst, match: Match) -> SpecAst:
        s_index = match.path[0]
        statement = ast.statements[s_index - 1]
        assert isinstance(statement, SuchThatStmt)
        statements = list(ast.statements)
        statements[s_index - 1] = SuchThatStmt((*statement.exprs, match.bindings["derived"]), statement.pos)  # type: ignore[arg-type]
        return SpecAst(tuple(statements))


def _alias(ast: SpecAst, name: str) -> Node | None:
    for statement in ast.statements:
        if isinstance(statement, LettingStmt) and statement.name == name:
            return statement.value
    return None


def _declared_domain(ast: SpecAst, name: str) -> Node | None:
    for statement in ast.statements:
        if isinstance(statement, FindStmt) and statement.name == name:
            return statement.domain
        if isinstance(statement, GivenStmt) and name in statement.names:
            return statement.domain
    return None


def _provably_non_empty(ast: SpecAst, range_: Node) -> bool:
    if isinstance(range_, DomainRef):
        target = _alias(ast, range_.name)
        return target is not None and _provably_non_empty(ast, target)
    if isinstance(range_, BoolDomain):
        return True
    if isinstance(range_, IntDomain):
        if range_.hi is None or free_names(range_.lo) or free_names(range_.hi):
            return False
        try:
            return evaluate(range_.lo) <= evaluate(range_.hi)  # type: ignore[operator]
        except EvaluationError:
            return False
    if isinstance(range_, RelationLit):
        return bool(range_.tuples)
    if isinstance(range_, Ref):
        domain = _declared_domain(ast, range_.name)
        if isinstance(domain, DomainRef):
            domain = _alias(ast, domain.name)
        if not isinstance(domain, RelationDomain):
            return False
        for name in ("minSize", "size"):
            value = domain.attr(name)
            if isinstance(value, IntLit) and value.value >= 1:
                return True
    return False


class CardinalityAttrRule(RewriteRule):
    name = "card-attr"
    kind = "domain-strengthening"
    soundness = "a top-level cardinality bound on a set variable is exactly its size attribute"

    def match(self, ast: SpecAst) -> list[Match]:
        matches: list[Match] = []
        for path, expr in _top_level_constraints(ast):
            found = self._lower(ast, expr)
            if found is not None:
                target, attr, value = found
                matches.append(Match(self.name, path, {"set": target, "attr": attr, "value": value}))
        return matches

    def _lower(self, ast: SpecAst, expr: Node) -> tuple[Ref, str, Node] | None:  # noqa: C901
        if not isinstance(expr, Binary) or expr.op not in _FLIPPED:
            return None
        op, card, bound = expr.op, expr.left, expr.right
        if not _is_cardinality(card):
            op, card, bound = _FLIPPED[expr.op], expr.right, expr.left
            if not _is_cardinality(card):
                return None
        target = card.operand  # type: ignore[union-attr]
        index = _find_index(ast, target.name)
        if index is None:
            return None
        domain = ast.statements[index].domain  # type: ignore[union-attr]
        if not isinstance(domain, RelationDomain) or domain.attr("size") is not None:
            return None
        if _contains_decision(bound) or not free_names(bound) <= _declared_before(ast, index):
            return None
        if isinstance(bound, IntLit) and bound.value < 0:
            return None
        if op == "=":
            if domain.attrs:
                return None
            return target, "size", bound
        attr = "minSize" if op in (">=", ">") else "maxSize"
        if op == ">":
            value = _offset(bound, 1)
        elif op == "<":
            value = _offset(bound, -1)
        else:
            value = bound
        if isinstance(value, IntLit) and value.value < 0:
            return None
        current = domain.attr(attr)
        if current is not None:
            if not (isinstance(current, IntLit) and isinstance(value, IntLit)):
                return None
            merge = max if attr == "minSize" else min
            value = IntLit(merge(current.value, value.value))
        return target, attr, value

    def rewrite(self, ast: SpecAst, match: Match) -> SpecAst:
        target = match.bindings["set"]
        assert isinstance(target, Ref)
        find = ast.find(target.name)
        assert find is not None and isinstance(find.domain, RelationDomain)
        domain = find.domain.with_attr(str(match.bindings["attr"]), match.bindings["value"])  # type: ignore[arg-type]
        return _remove_constraint(_replace_find_domain(ast, target.name, domain), match.path)


def _is_cardinality(node: Node) -> bool:
    return (
        isinstance(node, Unary)
        and node.op == "|"
        and isinstance(node.operand, Ref)
        and node.operand.ref_kind == REF_DECISION
    )


def _offset(bound: Node, delta: int) -> Node:
    if isinstance(bound, IntLit):
        return IntLit(bound.value + delta)
    return Binary("+" if delta > 0 else "-", bound, IntLit(abs(delta)))


class WitnessMinSizeRule(RewriteRule):
    name = "witness-minsize"
    kind = "domain-strengthening"
    soundness = "a set that must contain a fixed element has at least one element"

    def match(self, ast: SpecAst) -> list[Match]:
        matches: list[Match] = []
        for path, expr in _top_level_constraints(ast):
            if not isinstance(expr, Binary) or expr.op != "in":
                continue
            target = expr.right
            if not isinstance(target, Ref) or target.ref_kind != REF_DECISION:
                continue
            if _contains_decision(expr.left):
                continue
            find = ast.find(target.name)
            if find is None or not isinstance(find.domain, RelationDomain):
                continue
            domain = find.domain
            if domain.attr("size") is not None:
                continue
            current = domain.attr("minSize")
            if current is not None and not (isinstance(current, IntLit) and current.value < 1):
                continue
            matches.append(Match(self.name, path, {"set": target, "witness": expr.left}))
        return matches

    def rewrite(self, ast: SpecAst, match: Match) -> SpecAst:
        target = match.bindings["set"]
        assert isinstance(target, Ref)
        find = ast.find(target.name)
        assert find is not None and isinstance(find.domain, RelationDomain)
        return _replace_find_domain(ast, target.name, find.domain.with_attr("minSize", IntLit(1)))


RULES: tuple[RewriteRule, ...] = (
    CommuteRule(),
    ConstantFoldRule(),
    IdentityElimRule(),
    ImpliedSumRule(),
    CardinalityAttrRule(),
    WitnessMinSizeRule(),
)
RULE_NAMES = tuple(rule.name for rule in RULES)
