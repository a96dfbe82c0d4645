from __future__ import annotations

import json

import pytest

from reformine.domain.models import GraphDoc
from reformine.services.graph_ir import (
    GraphDecodeError,
    export,
    from_graph,
    parse_graph_json,
    to_graph,
    to_networkx,
)
from reformine.services.spec_parser import parse_spec


def _graph_payload(vertices: list[str], edges: list[tuple[int, int, int]]) -> str:
    return json.dumps(
        {
            "vertices": [{"index": i, "label": label} for i, label in enumerate(vertices)],
            "edges": [
                {"index": i, "source": source, "target": target, "label": label}
                for i, (source, target, label) in enumerate(edges)
            ],
        }
    )


def test_product_graph_has_tree_shape(fixture_text) -> None:
    graph = to_graph(parse_spec(fixture_text("product.emini")))

    assert len(graph.vertices) == 16
    assert len(graph.edges) == 15
    assert graph.vertices[0].label == "root#Node"
    assert graph.vertices[-1].label == "x#ReferenceToDecisionVariable"


def test_boolean_find_graph_and_gp2_text() -> None:
    graph = to_graph(parse_spec("find b : bool"))

    assert [v.label for v in graph.vertices] == ["root#Node", "find#FindStatement", "b#DecisionVariable", "bool#BoolDomain"]
    assert [e.label for e in graph.edges] == [1, 1, 1]
    assert export(graph, "gp2").strip() == (
        '[ (0, "root#Node") (1, "find#FindStatement") (2, "b#DecisionVariable") (3, "bool#BoolDomain") '
        "| (0, 0, 1, 1) (1, 1, 2, 1) (2, 2, 3, 1) ]"
    )


def test_empty_spec_graph() -> None:
    graph = to_graph(parse_spec(""))

    assert len(graph.vertices) == 1
    assert graph.edges == []
    assert export(graph, "gp2").strip() == '[ (0, "root#Node") | ]'


def test_edge_labels_are_child_ordinals(fixture_text) -> None:
    digraph = to_networkx(to_graph(parse_spec(fixture_text("product.emini"))))

    equals = next(n for n, token in digraph.nodes(data="token") if token == "=")
    labels = sorted(digraph.edges[equals, child]["label"] for child in digraph.successors(equals))
    assert labels == [1, 2]


def test_from_graph_restores_the_tree(fixture_text, spec_corpus) -> None:
    product = parse_spec(fixture_text("product.emini"))
    assert from_graph(to_graph(product)) == product

    for seed, source in spec_corpus[:60]:
        ast = parse_spec(source)
        assert from_graph(to_graph(ast)) == ast, f"seed {seed}"


def test_party_problem_survives_the_graph_round_trip(fixture_text) -> None:
    ast = parse_spec(fixture_text("progressive_party.emini"))

    assert from_graph(to_graph(ast)) == ast


def test_json_export_parses_back_to_the_same_graph(fixture_text) -> None:
    graph = to_graph(parse_spec(fixture_text("progressive_party.emini")))

    assert parse_graph_json(export(graph, "json")) == graph


def test_dot_export_names_every_vertex() -> None:
    text = export(to_graph(parse_spec("find b : bool")), "dot")

    assert text.startswith("digraph")
    assert "b#DecisionVariable" in text
    assert text.count("->") == 3


def test_two_roots_are_rejected() -> None:
    graph = parse_graph_json(_graph_payload(["root#Node", "find#FindStatement"], []))

    with pytest.raises(GraphDecodeError, match="not a tree"):
        from_graph(graph)


def test_ordinal_gaps_are_rejected() -> None:
    payload = _graph_payload(
        ["root#Node", "find#FindStatement", "find#FindStatement", "a#DecisionVariable", "bool#BoolDomain", "b#DecisionVariable", "bool#BoolDomain"],
        [(0, 1, 1), (0, 2, 3), (1, 3, 1), (3, 4, 1), (2, 5, 1), (5, 6, 1)],
    )

    with pytest.raises(GraphDecodeError, match="child ordinals"):
        from_graph(parse_graph_json(payload))


def test_unknown_kinds_and_arity_errors_are_reported() -> None:
    unknown = _graph_payload(["root#Node", "x#Mystery"], [(0, 1, 1)])
    with pytest.raises(GraphDecodeError):
        from_graph(parse_graph_json(unknown))

    short = _graph_payload(["root#Node", "find#FindStatement"], [(0, 1, 1)])
    with pytest.raises(GraphDecodeError):
        from_graph(parse_graph_json(short))


def test_schema_violations_are_decode_errors() -> None:
    with pytest.raises(GraphDecodeError, match="schema"):
        parse_graph_json('{"vertices": [{"index": 0}], "edges": []}')
    with pytest.raises(GraphDecodeError):
        parse_graph_json("{not json")


def test_graph_doc_rejects_sparse_indices() -> None:
    with pytest.raises(ValueError):
        GraphDoc.model_validate({"vertices": [{"index": 1, "label": "root#Node"}], "edges": []})
