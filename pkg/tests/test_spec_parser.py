from __future__ import annotations

import pytest

from reformine.domain.ast import (
    REF_BINDER,
    REF_DECISION,
    REF_LETTING,
    REF_PARAMETER,
    Binary,
    Expr,
    FindStmt,
    IntDomain,
    IntLit,
    Quantifier,
    Ref,
    RelationDomain,
    SuchThatStmt,
    Unary,
    WhereStmt,
)
from reformine.services.spec_checker import SpecCheckError, SpecCheckService
from reformine.services.spec_parser import SpecSyntaxError, parse_spec, parse_tree


def _constraint(text: str) -> Expr:
    return parse_spec(text).constraints()[0]


def test_parse_product_find_and_constraint(fixture_text) -> None:
    ast = parse_spec(fixture_text("product.emini"))

    assert [type(s) for s in ast.statements] == [FindStmt, SuchThatStmt]
    find = ast.find("x")
    assert find is not None
    assert find.domain == IntDomain(IntLit(0), IntLit(100))
    assert len(ast.constraints()) == 1


def test_parse_minimal_boolean_spec() -> None:
    ast = parse_spec("find b : bool such that b")

    assert [f.name for f in ast.finds()] == ["b"]
    assert ast.constraints() == [Ref("b", REF_DECISION)]


def test_truncated_input_reports_end_position() -> None:
    with pytest.raises(SpecSyntaxError) as excinfo:
        parse_spec("find x :", source="cut.emini")

    error = excinfo.value
    assert error.line == 1
    assert error.column == 9
    assert "':'" in error.message
    assert str(error).startswith("cut.emini:1:9: ")


def test_unexpected_character_is_located() -> None:
    with pytest.raises(SpecSyntaxError) as excinfo:
        parse_spec("find x : int(0..3)\nsuch that x # 1")

    assert excinfo.value.line == 2
    assert excinfo.value.column == 13


def test_precedence_follows_essence_conventions() -> None:
    expr = _constraint("find a, b : bool\nfind x : int(0..3)\nsuch that a /\\ b -> x + 1 * 2 < 3 \\/ !a")

    assert isinstance(expr, Binary) and expr.op == "->"
    assert isinstance(expr.left, Binary) and expr.left.op == "/\\"
    disjunction = expr.right
    assert isinstance(disjunction, Binary) and disjunction.op == "\\/"
    comparison = disjunction.left
    assert isinstance(comparison, Binary) and comparison.op == "<"
    assert comparison.left == Binary("+", Ref("x", REF_DECISION), Binary("*", IntLit(1), IntLit(2)))
    assert disjunction.right == Unary("!", Ref("a", REF_DECISION))


def test_implication_is_right_associative_and_arithmetic_left() -> None:
    expr = _constraint("find a, b, c : bool\nfind x : int(0..3)\nsuch that a -> b -> c")

    assert expr == Binary(
        "->",
        Ref("a", REF_DECISION),
        Binary("->", Ref("b", REF_DECISION), Ref("c", REF_DECISION)),
    )
    second = parse_spec("find x : int(0..3)\nsuch that x - 1 - 1 = 0").constraints()[0]
    assert second.left == Binary("-", Binary("-", Ref("x", REF_DECISION), IntLit(1)), IntLit(1))


def test_quantifier_body_extends_to_the_end() -> None:
    expr = _constraint("find x : int(0..3)\nsuch that forAll i : int(1..2) . i <= x /\\ x < 3")

    assert isinstance(expr, Quantifier)
    assert expr.quant == "forAll"
    assert isinstance(expr.body, Binary) and expr.body.op == "/\\"
    assert expr.body.left.left == Ref("i", REF_BINDER)


def test_multi_name_sugar_desugars_finds_and_binders() -> None:
    ast = parse_spec("find a, b : int(0..2)\nsuch that forAll i, j : int(1..2) . i + j > a - b")

    assert [f.name for f in ast.finds()] == ["a", "b"]
    outer = ast.constraints()[0]
    assert isinstance(outer, Quantifier) and outer.binder == "i"
    assert isinstance(outer.body, Quantifier) and outer.body.binder == "j"


def test_where_list_becomes_separate_statements() -> None:
    ast = parse_spec("given n : int(1..5)\nwhere n >= 1, n <= 4\nfind x : int(0..n)")

    assert sum(isinstance(s, WhereStmt) for s in ast.statements) == 2


def test_references_carry_resolved_kinds() -> None:
    ast = parse_spec(
        "given n : int(1..5)\n"
        "letting m be n + 1\n"
        "find x : int(0..m)\n"
        "such that forAll i : int(1..n) . x >= i - m"
    )
    quantifier = ast.constraints()[0]

    assert quantifier.range == IntDomain(IntLit(1), Ref("n", REF_PARAMETER))
    comparison = quantifier.body
    assert comparison.left == Ref("x", REF_DECISION)
    assert comparison.right == Binary("-", Ref("i", REF_BINDER), Ref("m", REF_LETTING))


def test_relation_domains_and_attributes() -> None:
    ast = parse_spec("find S : set (maxSize 2, minSize 1) of int(1..3)")

    sets = ast.find("S")
    assert sets is not None and isinstance(sets.domain, RelationDomain)
    assert [a.name for a in sets.domain.attrs] == ["minSize", "maxSize"]
    assert sets.domain.is_set


def test_comments_are_ignored() -> None:
    ast = parse_spec("$ header\nfind x : int(0..3) $ trailing\nsuch that x = 2 $ done\n")

    assert len(ast.constraints()) == 1


def test_unresolved_identifier_is_reported_with_code() -> None:
    with pytest.raises(SpecCheckError) as excinfo:
        parse_spec("find x : int(0..3)\nsuch that x = y")

    assert excinfo.value.code == "UNRESOLVED_IDENTIFIER"
    assert excinfo.value.line == 2
    assert "'y'" in excinfo.value.message


def test_duplicate_binder_is_rejected() -> None:
    with pytest.raises(SpecCheckError) as excinfo:
        parse_spec("find x : int(0..3)\nsuch that forAll i, i : int(1..2) . i <= x")

    assert excinfo.value.code == "DUPLICATE_BINDER"


def test_type_errors_and_duplicate_declarations() -> None:
    cases = {
        "find x : int(0..3)\nsuch that x": "TYPE_MISMATCH",
        "find x : int(0..3)\nfind x : bool": "DUPLICATE_DECLARATION",
        "find x : int(0..3)\nminimising x\nmaximising x": "MULTIPLE_OBJECTIVES",
        "find S : set (size 1, minSize 1) of int(1..3)": "DOMAIN_ATTRIBUTE",
        "find x : int(0..3)\nfind y : int(0..x)": "NOT_CONSTANT",
    }
    for text, code in cases.items():
        with pytest.raises(SpecCheckError) as excinfo:
            parse_spec(text)
        assert excinfo.value.code == code, text


def test_check_service_accumulates_findings_without_raising() -> None:
    ast = parse_tree("find x : int(0..3)\nsuch that x = y, z > 1")

    report = SpecCheckService().check(ast)

    codes = [finding.code for finding in report.findings]
    assert codes.count("UNRESOLVED_IDENTIFIER") == 2
    assert report.has_blocking


def test_parse_fixture_party_problem(fixture_text) -> None:
    ast = parse_spec(fixture_text("progressive_party.emini"))

    assert [g.names for g in ast.givens()] == [("n_boats", "n_periods"), ("capacity", "crew")]
    assert [f.name for f in ast.finds()] == ["hosts", "sched"]
    assert ast.objective() is not None
    assert len(ast.constraints()) == 5
