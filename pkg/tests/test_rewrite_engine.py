from __future__ import annotations

import json
from collections import Counter

import pytest

from reformine.domain.ast import SpecAst
from reformine.services.flatten import flatten
from reformine.services.grounding import ground
from reformine.services.rewrite_engine import (
    StaleMatchError,
    UnknownRuleError,
    apply,
    canonical_hash,
    enumerate_matches,
    get_rule,
    normalize,
    rule_library,
    trace,
)
from reformine.services.rewrite_rules import RULE_NAMES
from reformine.services.solver import brute_force, solve
from reformine.services.spec_parser import parse_spec
from reformine.services.spec_printer import pretty, pretty_expr

from conftest import random_instance


def _solutions(ast: SpecAst, instance: dict[str, int]) -> set[str]:
    csp = flatten(ground(ast, instance))
    return {json.dumps(csp.decode(raw), sort_keys=True) for raw in brute_force(csp)}


def _apply_only(rule_name: str, text: str, index: int = 0) -> str:
    ast = parse_spec(text)
    rule = get_rule(rule_name)
    return pretty(apply(rule, ast, enumerate_matches(rule, ast)[index]))


def test_rule_library_order_and_selection() -> None:
    assert RULE_NAMES == ("commute", "const-fold", "identity-elim", "implied-sum", "card-attr", "witness-minsize")
    assert [rule.name for rule in rule_library(["witness-minsize", "commute"])] == ["commute", "witness-minsize"]
    with pytest.raises(UnknownRuleError, match="unknown rule 'swap'"):
        rule_library(["swap"])


def test_commute_matches_product_in_preorder(fixture_text) -> None:
    ast = parse_spec(fixture_text("product.emini"))

    matches = enumerate_matches(get_rule("commute"), ast)

    assert [m.path for m in matches] == [(2, 1), (2, 1, 1), (2, 1, 1, 1), (2, 1, 1, 1, 2)]


def test_commute_at_the_sum_swaps_its_operands(fixture_text) -> None:
    text = _apply_only("commute", fixture_text("product.emini"), index=3)

    assert "1*(3+2)*4 = x" in text


def test_const_fold_on_the_outer_product(fixture_text) -> None:
    ast = parse_spec(fixture_text("product.emini"))
    rule = get_rule("const-fold")
    match = next(m for m in enumerate_matches(rule, ast) if m.path == (2, 1, 1))

    assert "    20 = x" in pretty(apply(rule, ast, match))


def test_const_fold_has_nothing_to_do_on_a_plain_boolean() -> None:
    assert enumerate_matches(get_rule("const-fold"), parse_spec("find b : bool such that b")) == []


def test_const_fold_skips_undefined_arithmetic() -> None:
    ast = parse_spec("find x : int(0..3)\nsuch that x = 1 / 0")

    assert enumerate_matches(get_rule("const-fold"), ast) == []


def test_identity_elimination_forms() -> None:
    text = _apply_only("identity-elim", "find x : int(0..3)\nsuch that x*1 = 2")
    assert "    x = 2" in text

    text = _apply_only("identity-elim", "find b : bool\nsuch that !(!b)")
    assert text.endswith("such that\n    b\n")


def test_implied_sum_matches_a_forall_inequality() -> None:
    ast = parse_spec("find S : set of int(1..3)\nfind y : int(0..3)\nsuch that forAll h in S . h <= y")

    matches = enumerate_matches(get_rule("implied-sum"), ast)

    assert len(matches) == 1
    assert matches[0].path == (3, 1)
    rewritten = apply(get_rule("implied-sum"), ast, matches[0])
    assert pretty_expr(rewritten.constraints()[1]) == "(sum h in S . h) <= (sum h in S . y)"
    assert enumerate_matches(get_rule("implied-sum"), rewritten) == []


def test_implied_sum_keeps_strictness_only_for_non_empty_ranges() -> None:
    loose = "find S : set of int(1..3)\nfind y : int(0..3)\nsuch that forAll h in S . h < y"
    strict = "find S : set (minSize 1) of int(1..3)\nfind y : int(0..3)\nsuch that forAll h in S . h < y"

    loose_derived = parse_spec(_apply_only("implied-sum", loose)).constraints()[1]
    strict_derived = parse_spec(_apply_only("implied-sum", strict)).constraints()[1]

    assert loose_derived.op == "<="
    assert strict_derived.op == "<"


def test_implied_sum_descends_through_enclosing_forall() -> None:
    text = (
        "find S : set of int(1..3)\nfind x : int(0..3)\n"
        "such that forAll p : int(1..2) . forAll h in S . h < x + p"
    )
    ast = parse_spec(text)

    matches = enumerate_matches(get_rule("implied-sum"), ast)

    assert [m.path for m in matches] == [(3, 1)]
    rewritten = apply(get_rule("implied-sum"), ast, matches[0])
    assert pretty_expr(rewritten.constraints()[1]) == "forAll p : int(1..2) . (sum h in S . h) <= (sum h in S . x+p)"
    assert enumerate_matches(get_rule("implied-sum"), rewritten) == []
    assert _solutions(rewritten, {}) == _solutions(ast, {})


def test_implied_sum_skips_nested_shapes_without_an_inequality() -> None:
    ast = parse_spec("find S : set of int(1..3)\nsuch that forAll p : int(1..2) . exists h in S . h = p")

    assert enumerate_matches(get_rule("implied-sum"), ast) == []


def test_focused_corpus_has_a_match_for_every_rule(rule_focused_corpus) -> None:
    for seed, source in rule_focused_corpus:
        ast = parse_spec(source)
        missing = [rule.name for rule in rule_library() if not enumerate_matches(rule, ast)]
        assert missing == [], f"seed {seed}"


def test_cardinality_bound_becomes_min_size(fixture_text) -> None:
    text = _apply_only("card-attr", fixture_text("hosts.emini"))

    assert text == "find hosts : set (minSize 1) of int(1..5)\n"


def test_cardinality_forms_lower_to_attributes() -> None:
    base = "find S : set of int(1..5)\nsuch that "
    assert "set (maxSize 2)" in _apply_only("card-attr", base + "|S| < 3")
    assert "set (minSize 3)" in _apply_only("card-attr", base + "|S| > 2")
    assert "set (size 2)" in _apply_only("card-attr", base + "2 = |S|")
    assert "set (minSize 2)" in _apply_only("card-attr", base + "2 <= |S|")


def test_cardinality_rule_never_fires_next_to_a_size_attribute() -> None:
    ast = parse_spec("find S : set (size 2) of int(1..5)\nsuch that |S| >= 1")

    assert enumerate_matches(get_rule("card-attr"), ast) == []


def test_witness_membership_raises_min_size() -> None:
    text = _apply_only("witness-minsize", "find S : set of int(1..5)\nsuch that 3 in S")

    assert text.startswith("find S : set (minSize 1) of int(1..5)\n")
    assert "3 in S" in text


def test_stale_matches_are_rejected(fixture_text) -> None:
    product = parse_spec(fixture_text("product.emini"))
    rule = get_rule("commute")
    match = enumerate_matches(rule, product)[3]

    with pytest.raises(StaleMatchError):
        apply(rule, parse_spec("find b : bool such that b"), match)


def test_apply_leaves_its_input_untouched(fixture_text) -> None:
    text = fixture_text("product.emini")
    ast = parse_spec(text)
    rule = get_rule("commute")

    apply(rule, ast, enumerate_matches(rule, ast)[0])

    assert ast == parse_spec(text)


def test_normalize_orders_and_simplifies() -> None:
    cases = {
        "find x : int(0..3)\nsuch that x + 1 = 2": "2 = 1+x",
        "find b : bool\nsuch that !(!b)": "b",
        "find x : int(0..100)\nsuch that 1*(2+3)*4 = x": "20 = x",
    }
    for text, expected in cases.items():
        assert pretty_expr(normalize(parse_spec(text)).constraints()[0]) == expected


def test_normalize_is_idempotent_over_the_corpus(spec_corpus) -> None:
    for seed, source in spec_corpus:
        once = normalize(parse_spec(source))
        assert normalize(once) == once, f"seed {seed}"


def test_canonical_hash_identifies_equivalent_forms(fixture_text) -> None:
    def digest(text: str) -> str:
        return canonical_hash(parse_spec(text))

    assert digest("find x, y : int(0..3)\nsuch that x + y = 3") == digest("find x, y : int(0..3)\nsuch that y + x = 3")
    product = fixture_text("product.emini")
    assert digest(product) == digest(product.replace("1*(2+3)*4", "4*(2+3)*1"))
    assert digest("find x : int(0..1)") != digest("find x : int(0..2)")
    assert len(digest(product)) == 16


def test_canonical_hash_over_corpus_pairs(spec_corpus, rule_focused_corpus) -> None:
    equivalent: Counter[str] = Counter()
    different = 0
    for seed, source in spec_corpus[:50] + rule_focused_corpus[:20]:
        ast = parse_spec(source)
        digest = canonical_hash(ast)
        for name in ("commute", "identity-elim"):
            rule = get_rule(name)
            for match in enumerate_matches(rule, ast)[:2]:
                assert canonical_hash(apply(rule, ast, match)) == digest, f"seed {seed}, {name} at {match.path}"
                equivalent[name] += 1
        shifted = parse_spec(source.replace("find x0 : int(0..", "find x0 : int(1..", 1))
        assert canonical_hash(shifted) != digest, f"seed {seed}"
        different += 1
    assert equivalent["commute"] >= 20
    assert equivalent["identity-elim"] >= 20
    assert different >= 20


def test_canonical_hash_separates_changed_literals(rule_focused_corpus) -> None:
    digests = set()
    for seed, source in rule_focused_corpus[:20]:
        widened = source.replace("find y : int(0..3)", "find y : int(0..4)")
        assert canonical_hash(parse_spec(widened)) != canonical_hash(parse_spec(source)), f"seed {seed}"
        digests.add(canonical_hash(parse_spec(source)))
    assert len(digests) > 1


def test_trace_records_hashes(fixture_text) -> None:
    ast = parse_spec(fixture_text("product.emini"))
    rule = get_rule("const-fold")

    record = trace(rule, ast, enumerate_matches(rule, ast)[0])

    assert record.rule == "const-fold"
    assert record.path == [2, 1, 1]
    assert record.before_hash == record.after_hash


def test_every_rule_preserves_solutions_on_the_corpus(spec_corpus, rule_focused_corpus) -> None:
    applied: Counter[str] = Counter()
    for seed, source in spec_corpus[:100] + rule_focused_corpus:
        ast = parse_spec(source)
        instance = random_instance(source, seed)
        expected = _solutions(ast, instance)
        for rule in rule_library():
            matches = enumerate_matches(rule, ast)
            for match in matches[:2]:
                rewritten = apply(rule, ast, match)
                assert _solutions(rewritten, instance) == expected, f"seed {seed}, {rule.name} at {match.path}"
                applied[rule.name] += 1
    assert min(applied[name] for name in RULE_NAMES) >= 50, dict(applied)


@pytest.mark.parametrize("rule_name", ["card-attr", "witness-minsize"])
def test_domain_strengthening_never_adds_search_nodes(rule_name, spec_corpus, rule_focused_corpus) -> None:
    rule = get_rule(rule_name)
    checked = 0
    for seed, source in spec_corpus + rule_focused_corpus:
        ast = parse_spec(source)
        matches = enumerate_matches(rule, ast)
        if not matches:
            continue
        instance = random_instance(source, seed)
        mode = "optimize" if ast.objective() is not None else "first"
        before = solve(flatten(ground(ast, instance)), mode=mode)
        for match in matches:
            after = solve(flatten(ground(apply(rule, ast, match), instance)), mode=mode)
            assert after.status == before.status, f"seed {seed}"
            assert after.nodes <= before.nodes, f"seed {seed}: {after.nodes} > {before.nodes}"
            checked += 1
    assert checked >= 50
