"""Labelled directed graph form of the syntax tree.

Vertices are numbered in pre-order and labelled ``token#Kind``; each edge carries
the 1-based position of its target among the source's children, so the tree can
be rebuilt exactly from the graph alone.
"""

from __future__ import annotations

import json
from pathlib import Path

import networkx as nx
from jsonschema import Draft202012Validator
from pydantic import ValidationError

from reformine.domain.ast import (
    ATTRIBUTE_ORDER,
    BINARY_OPS,
    DOMAIN_TYPES,
    EXPR_TYPES,
    QUANTIFIERS,
    REF_KINDS,
    UNARY_OPS,
    Attribute,
    Binary,
    BoolDomain,
    BoolLit,
    Declarator,
    DomainRef,
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
    SuchThatStmt,
    TupleLit,
    Unary,
    WhereStmt,
    walk,
)
from reformine.domain.errors import ReformineError
from reformine.domain.models import GraphDoc, GraphEdge, GraphFormat, GraphVertex
from reformine.services.paths import schemas_dir as default_schemas_dir
from reformine.services.renderer import TemplateRenderService


STATEMENT_TYPES = (GivenStmt, LettingStmt, WhereStmt, FindStmt, SuchThatStmt, ObjectiveStmt)


class GraphDecodeError(ReformineError):
    """Raised when a graph is not the encoding of a well-formed syntax tree."""


def to_graph(ast: SpecAst) -> GraphDoc:
    vertices: list[GraphVertex] = []
    edges: list[GraphEdge] = []
    index_of: dict[tuple[int, ...], int] = {}
    for path, node in walk(ast):
        index = len(vertices)
        index_of[path] = index
        vertices.append(GraphVertex(index=index, label=f"{node.token}#{node.kind}"))
        if path:
            edges.append(
                GraphEdge(index=index - 1, source=index_of[path[:-1]], target=index, label=path[-1])
            )
    return GraphDoc(vertices=vertices, edges=edges)


def to_networkx(graph: GraphDoc) -> nx.DiGraph:
    digraph = nx.DiGraph()
    for vertex in graph.vertices:
        token, _, kind = vertex.label.rpartition("#")
        digraph.add_node(vertex.index, label=vertex.label, token=token, kind=kind)
    for edge in graph.edges:
        digraph.add_edge(edge.source, edge.target, label=edge.label, index=edge.index)
    return digraph


def export(graph: GraphDoc, fmt: GraphFormat, *, renderer: TemplateRenderService | None = None) -> str:
    if fmt == "json":
        return json.dumps(graph.model_dump(), indent=2) + "\n"
    renderer = renderer or TemplateRenderService()
    if fmt == "gp2":
        return renderer.render("host_graph.gp2.j2", vertices=graph.vertices, edges=graph.edges)
    return renderer.render("ast_graph.dot.j2", name="spec", vertices=graph.vertices, edges=graph.edges)


def parse_graph_json(text: str, *, source: str | None = None, schema_root: Path | None = None) -> GraphDoc:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphDecodeError(exc.msg, source=source, line=exc.lineno, column=exc.colno) from exc
    schema_path = (schema_root or default_schemas_dir()) / "graph_doc.schema.json"
    with schema_path.open("r", encoding="utf-8") as handle:
        validator = Draft202012Validator(json.load(handle))
    errors = list(validator.iter_errors(data))
    if errors:
        raise GraphDecodeError(f"graph schema validation failed: {errors[0].message}", source=source)
    try:
        return GraphDoc.model_validate(data)
    except ValidationError as exc:
        raise GraphDecodeError(str(exc.errors()[0]["msg"]), source=source) from exc


def _check_tree(digraph: nx.DiGraph) -> int:
    if digraph.number_of_nodes() == 0:
        raise GraphDecodeError("graph has no vertices")
    roots = [v for v in digraph.nodes if digraph.in_degree(v) == 0]
    if len(roots) != 1:
        raise GraphDecodeError(f"graph is not a tree: {len(roots)} vertices have no parent")
    if not nx.is_arborescence(digraph):
        raise GraphDecodeError("graph is not a tree: a vertex has several parents or a cycle exists")
    for vertex in digraph.nodes:
        labels = sorted(digraph.edges[vertex, child]["label"] for child in digraph.successors(vertex))
        if labels != list(range(1, len(labels) + 1)):
            raise GraphDecodeError(f"child ordinals of vertex {vertex} are {labels}, expected 1..{len(labels)}")
    return roots[0]


class _Decoder:
    def __init__(self, digraph: nx.DiGraph) -> None:
        self.digraph = digraph

    def children(self, vertex: int) -> list[Node]:
        ordered = sorted(self.digraph.successors(vertex), key=lambda c: self.digraph.edges[vertex, c]["label"])
        return [self.node(child) for child in ordered]

    def fail(self, vertex: int, reason: str) -> GraphDecodeError:
        return GraphDecodeError(f"vertex {vertex} '{self.digraph.nodes[vertex]['label']}': {reason}")

    def expect(self, vertex: int, nodes: list[Node], count: int | None, types: tuple, what: str) -> None:
        if count is not None and len(nodes) != count:
            raise self.fail(vertex, f"expected {count} children, found {len(nodes)}")
        for node in nodes:
            if not isinstance(node, types):
                raise self.fail(vertex, f"child {node.kind} is not {what}")

    def declarator(self, vertex: int, node: Node, role: str, with_body: bool) -> Declarator:
        if not isinstance(node, Declarator) or node.role != role:
            raise self.fail(vertex, f"expected a {role} child")
        if with_body != (node.body is not None):
            raise self.fail(vertex, f"{role} has the wrong number of children")
        return node

    def node(self, vertex: int) -> Node:  # noqa: C901
        attrs = self.digraph.nodes[vertex]
        token, kind = attrs["token"], attrs["kind"]
        kids = self.children(vertex)
        if kind == "Node":
            self.expect(vertex, kids, None, STATEMENT_TYPES, "a statement")
            return SpecAst(tuple(kids))
        if kind in ("DecisionVariable", "Parameter", "LettingVariable", "QuantifiedVariable"):
            if len(kids) > 1:
                raise self.fail(vertex, "a declared name has at most one child")
            return Declarator(token, kind, kids[0] if kids else None)
        if kind == "FindStatement":
            if len(kids) != 1:
                raise self.fail(vertex, "expected one declared name")
            decl = self.declarator(vertex, kids[0], "DecisionVariable", True)
            self.expect(vertex, [decl.body], 1, DOMAIN_TYPES, "a domain")
            return FindStmt(decl.name, decl.body)
        if kind == "GivenStatement":
            if len(kids) < 2:
                raise self.fail(vertex, "expected names followed by a domain")
            names = [self.declarator(vertex, kid, "Parameter", False).name for kid in kids[:-1]]
            self.expect(vertex, kids[-1:], 1, DOMAIN_TYPES, "a domain")
            return GivenStmt(tuple(names), kids[-1])
        if kind == "LettingStatement":
            if len(kids) != 1:
                raise self.fail(vertex, "expected one declared name")
            decl = self.declarator(vertex, kids[0], "LettingVariable", True)
            self.expect(vertex, [decl.body], 1, DOMAIN_TYPES + EXPR_TYPES, "a value or domain")
            return LettingStmt(decl.name, decl.body)
        if kind == "WhereStatement":
            self.expect(vertex, kids, 1, EXPR_TYPES, "an expression")
            return WhereStmt(kids[0])
        if kind == "SuchThatStatement":
            if not kids:
                raise self.fail(vertex, "expected at least one constraint")
            self.expect(vertex, kids, None, EXPR_TYPES, "an expression")
            return SuchThatStmt(tuple(kids))
        if kind == "ObjectiveStatement":
            if token not in ("minimising", "maximising"):
                raise self.fail(vertex, "unknown objective direction")
            self.expect(vertex, kids, 1, EXPR_TYPES, "an expression")
            return ObjectiveStmt(token, kids[0])  # type: ignore[arg-type]
        if kind == "Integer":
            self.expect(vertex, kids, 0, (), "")
            try:
                return IntLit(int(token))
            except ValueError:
                raise self.fail(vertex, "not an integer") from None
        if kind == "Boolean":
            self.expect(vertex, kids, 0, (), "")
            if token not in ("true", "false"):
                raise self.fail(vertex, "not a boolean")
            return BoolLit(token == "true")
        if kind in REF_KINDS:
            self.expect(vertex, kids, 0, (), "")
            return Ref(token, kind)
        if kind == "UnaryExpression":
            if token not in UNARY_OPS:
                raise self.fail(vertex, "unknown unary operator")
            self.expect(vertex, kids, 1, EXPR_TYPES, "an expression")
            return Unary(token, kids[0])
        if kind == "BinaryExpression":
            if token not in BINARY_OPS:
                raise self.fail(vertex, "unknown binary operator")
            self.expect(vertex, kids, 2, EXPR_TYPES, "an expression")
            return Binary(token, kids[0], kids[1])
        if kind == "TupleLiteral":
            if not kids:
                raise self.fail(vertex, "empty tuple")
            self.expect(vertex, kids, None, EXPR_TYPES, "an expression")
            return TupleLit(tuple(kids))
        if kind == "RelationLiteral":
            try:
                return RelationLit(0, ()).with_children(tuple(kids))
            except (TypeError, AttributeError) as exc:
                raise self.fail(vertex, "relation literal elements must be constants") from exc
        if kind == "Quantifier":
            if token not in QUANTIFIERS:
                raise self.fail(vertex, "unknown quantifier")
            if len(kids) != 3:
                raise self.fail(vertex, f"expected 3 children, found {len(kids)}")
            binder = self.declarator(vertex, kids[0], "QuantifiedVariable", False)
            self.expect(vertex, kids[1:2], 1, DOMAIN_TYPES + (Ref, RelationLit), "a range")
            self.expect(vertex, kids[2:], 1, EXPR_TYPES, "an expression")
            return Quantifier(token, binder.name, kids[1], kids[2])
        if kind == "BoolDomain":
            self.expect(vertex, kids, 0, (), "")
            return BoolDomain()
        if kind == "IntDomain":
            if len(kids) not in (1, 2):
                raise self.fail(vertex, f"expected 1 or 2 bounds, found {len(kids)}")
            self.expect(vertex, kids, None, EXPR_TYPES, "an expression")
            return IntDomain(kids[0], kids[1] if len(kids) == 2 else None)
        if kind in ("SetDomain", "RelationDomain"):
            attributes = [kid for kid in kids if isinstance(kid, Attribute)]
            components = kids[len(attributes):]
            if kids[: len(attributes)] != attributes:
                raise self.fail(vertex, "attributes must precede component domains")
            if not components or (kind == "SetDomain" and len(components) != 1):
                raise self.fail(vertex, "wrong number of component domains")
            self.expect(vertex, components, None, DOMAIN_TYPES, "a domain")
            names = [a.name for a in attributes]
            if names != sorted(names, key=ATTRIBUTE_ORDER.index):
                raise self.fail(vertex, "attributes out of order")
            return RelationDomain(tuple(components), tuple(attributes), kind == "SetDomain")
        if kind == "DomainAttribute":
            if token not in ATTRIBUTE_ORDER:
                raise self.fail(vertex, "unknown attribute")
            self.expect(vertex, kids, 1, EXPR_TYPES, "an expression")
            return Attribute(token, kids[0])
        if kind == "ReferenceToDomain":
            self.expect(vertex, kids, 0, (), "")
            return DomainRef(token)
        raise self.fail(vertex, "unknown label")


def from_graph(graph: GraphDoc) -> SpecAst:
    if graph.vertices and len(graph.edges) != len(graph.vertices) - 1:
        raise GraphDecodeError(f"graph is not a tree: {len(graph.vertices)} vertices but {len(graph.edges)} edges")
    digraph = to_networkx(graph)
    root = _check_tree(digraph)
    ast = _Decoder(digraph).node(root)
    if not isinstance(ast, SpecAst):
        raise GraphDecodeError(f"root vertex {root} is not labelled root#Node")
    return ast
