from __future__ import annotations

import csv
import io
from collections import Counter

import networkx as nx
import numpy as np

from reformine.domain.ast import REF_KINDS, SpecAst
from reformine.domain.errors import ReformineError
from reformine.services.graph_ir import to_graph, to_networkx


NODE_KINDS = (
    "GivenStatement",
    "LettingStatement",
    "WhereStatement",
    "FindStatement",
    "SuchThatStatement",
    "ObjectiveStatement",
    "DecisionVariable",
    "Parameter",
    "LettingVariable",
    "QuantifiedVariable",
    *REF_KINDS,
    "Integer",
    "Boolean",
    "UnaryExpression",
    "BinaryExpression",
    "TupleLiteral",
    "RelationLiteral",
    "Quantifier",
    "BoolDomain",
    "IntDomain",
    "SetDomain",
    "RelationDomain",
    "DomainAttribute",
    "ReferenceToDomain",
)

SHAPE_FEATURES = (
    "depth",
    "node_count",
    "mean_branching",
    "max_branching",
    "quantifier_count",
    "constraint_count",
    "find_count",
)

FEATURE_NAMES = tuple(f"kind:{kind}" for kind in NODE_KINDS) + SHAPE_FEATURES


class FeatureError(ReformineError):
    """Raised when feature vectors cannot be compared."""


def featurize(ast: SpecAst) -> np.ndarray:
    """Structural feature vector in ``FEATURE_NAMES`` order; names and literal values do not affect it."""
    digraph = to_networkx(to_graph(ast))
    kinds = Counter(kind for _, kind in digraph.nodes(data="kind"))
    depth = max(nx.shortest_path_length(digraph, source=0).values())
    fanout = [degree for _, degree in digraph.out_degree() if degree > 0]
    shape = [
        depth,
        digraph.number_of_nodes(),
        float(np.mean(fanout)) if fanout else 0.0,
        max(fanout, default=0),
        kinds["Quantifier"],
        len(ast.constraints()),
        len(ast.finds()),
    ]
    return np.array([kinds[kind] for kind in NODE_KINDS] + shape, dtype=float)


def _check(vectors: list[np.ndarray]) -> np.ndarray:
    if not vectors:
        raise FeatureError("no feature vectors to compare")
    dimensions = {vector.shape for vector in vectors}
    if len(dimensions) != 1:
        raise FeatureError(f"feature vectors have different dimensions: {sorted(d[0] for d in dimensions)}")
    return np.vstack(vectors)


def _scaled(matrix: np.ndarray) -> np.ndarray:
    scale = np.abs(matrix).max(axis=0)
    scale[scale == 0] = 1.0
    return matrix / scale


def distance(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean distance after scaling each dimension by its maximum over the pair."""
    scaled = _scaled(_check([a, b]))
    return float(np.linalg.norm(scaled[0] - scaled[1]))


def pairwise(vectors: list[np.ndarray]) -> np.ndarray:
    """Distance matrix with every dimension scaled by its maximum over the whole corpus."""
    scaled = _scaled(_check(vectors))
    difference = scaled[:, None, :] - scaled[None, :, :]
    return np.linalg.norm(difference, axis=-1)


def _cell(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else f"{value:.6g}"


def feature_rows_csv(rows: list[tuple[str, np.ndarray]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["spec", *FEATURE_NAMES])
    for name, vector in rows:
        writer.writerow([name, *(_cell(v) for v in vector)])
    return buffer.getvalue()


def distance_matrix_csv(names: list[str], matrix: np.ndarray) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["spec", *names])
    for name, row in zip(names, matrix):
        writer.writerow([name, *(f"{v:.6f}" for v in row)])
    return buffer.getvalue()
