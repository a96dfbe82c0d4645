from __future__ import annotations

import hashlib
import logging

from reformine.domain.ast import COMMUTATIVE_OPS, Binary, BoolLit, IntLit, Node, Ref, RelationLit, SpecAst, Unary, transform
from reformine.domain.errors import ReformineError
from reformine.domain.models import RewriteTrace
from reformine.services.rewrite_rules import RULES, Match, RewriteRule, folded_literal, identity_operand
from reformine.services.spec_checker import SpecCheckService
from reformine.services.spec_printer import pretty, pretty_expr


LOG = logging.getLogger(__name__)


class StaleMatchError(ReformineError):
    """Raised when a match no longer addresses its pattern in the given tree."""


class UnknownRuleError(ReformineError):
    """Raised when a rule name is not part of the rule library."""


def rule_library(names: list[str] | None = None) -> list[RewriteRule]:
    """Rules in library order, optionally restricted to ``names``."""
    if names is None:
        return list(RULES)
    known = {rule.name for rule in RULES}
    unknown = [name for name in names if name not in known]
    if unknown:
        raise UnknownRuleError(f"unknown rule '{unknown[0]}' (known: {', '.join(r.name for r in RULES)})")
    wanted = set(names)
    return [rule for rule in RULES if rule.name in wanted]


def get_rule(name: str) -> RewriteRule:
    return rule_library([name])[0]


def enumerate_matches(rule: RewriteRule, ast: SpecAst) -> list[Match]:
    return rule.match(ast)


def _fold_negated_literal(node: Node) -> Node:
    if isinstance(node, Unary) and node.op == "-" and isinstance(node.operand, IntLit):
        return IntLit(-node.operand.value)
    return node


def apply(rule: RewriteRule, ast: SpecAst, match: Match) -> SpecAst:
    if match.rule != rule.name or match not in rule.match(ast):
        raise StaleMatchError(f"{rule.name} match at {list(match.path)} no longer applies")
    rewritten = rule.rewrite(ast, match)
    rewritten = transform(rewritten, _fold_negated_literal)
    return SpecCheckService().resolve(rewritten)  # type: ignore[arg-type]


def _order_key(expr: Node) -> tuple[int, str, str]:
    if isinstance(expr, (IntLit, BoolLit, RelationLit)):
        rank = 0
    elif isinstance(expr, Ref):
        rank = 1
    else:
        rank = 2
    return (rank, pretty_expr(expr), repr(expr))


def _normalize_step(node: Node) -> Node:
    literal = folded_literal(node)
    if literal is not None:
        return literal
    operand = identity_operand(node)
    if operand is not None:
        return operand
    if isinstance(node, Binary) and node.op in COMMUTATIVE_OPS:
        if _order_key(node.right) < _order_key(node.left):
            return Binary(node.op, node.right, node.left)
    return node


def normalize(ast: SpecAst) -> SpecAst:
    """Constant folding, identity and double-negation elimination, and operand ordering to a fixpoint."""
    current = ast
    while True:
        following = transform(current, _normalize_step)
        if following == current:
            return following  # type: ignore[return-value]
        current = following  # type: ignore[assignment]


def canonical_hash(ast: SpecAst) -> str:
    text = pretty(normalize(ast))
    return hashlib.blake2b(text.encode("utf-8"), digest_size=8).hexdigest()


def apply_traced(rule: RewriteRule, ast: SpecAst, match: Match) -> tuple[SpecAst, RewriteTrace]:
    result = apply(rule, ast, match)
    record = RewriteTrace(
        rule=rule.name,
        path=list(match.path),
        before_hash=canonical_hash(ast),
        after_hash=canonical_hash(result),
    )
    LOG.debug("applied %s at %s: %s -> %s", rule.name, record.path, record.before_hash, record.after_hash)
    return result, record


def trace(rule: RewriteRule, ast: SpecAst, match: Match) -> RewriteTrace:
    return apply_traced(rule, ast, match)[1]
