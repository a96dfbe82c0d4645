from __future__ import annotations

import numpy as np
import pytest

from reformine.services.features import (
    FEATURE_NAMES,
    SHAPE_FEATURES,
    FeatureError,
    distance,
    distance_matrix_csv,
    feature_rows_csv,
    featurize,
    pairwise,
)
from reformine.services.spec_parser import parse_spec


def _features(text: str) -> dict[str, float]:
    return dict(zip(FEATURE_NAMES, featurize(parse_spec(text))))


def test_product_shape(fixture_text) -> None:
    values = _features(fixture_text("product.emini"))

    assert values["node_count"] == 16
    assert values["depth"] == 6
    assert values["find_count"] == 1
    assert values["constraint_count"] == 1
    assert values["quantifier_count"] == 0
    assert values["kind:Integer"] == 6
    assert values["kind:ReferenceToDecisionVariable"] == 1


def test_empty_spec_is_a_single_root() -> None:
    values = _features("")

    assert values["node_count"] == 1
    assert sum(v for k, v in values.items() if k != "node_count") == 0


def test_names_and_literal_values_do_not_matter() -> None:
    original = featurize(parse_spec("find x : int(0..9)\nsuch that x + 1 = 4"))
    renamed = featurize(parse_spec("find total : int(2..7)\nsuch that total + 3 = 5"))

    assert np.array_equal(original, renamed)
    assert distance(original, renamed) == 0.0


def test_distance_is_symmetric_and_ranks_similar_specs_closer(fixture_text) -> None:
    product = featurize(parse_spec(fixture_text("product.emini")))
    variant = featurize(parse_spec(fixture_text("product.emini").replace("1*(2+3)*4", "(2+3)*4")))
    party = featurize(parse_spec(fixture_text("progressive_party.emini")))

    assert distance(product, party) == pytest.approx(distance(party, product))
    assert distance(product, variant) < distance(product, party)


def test_pairwise_matrix(fixture_text) -> None:
    vectors = [featurize(parse_spec(fixture_text(name))) for name in ("product.emini", "rotation.emini", "hosts.emini")]

    matrix = pairwise(vectors)

    assert matrix.shape == (3, 3)
    assert np.allclose(np.diag(matrix), 0.0)
    assert np.allclose(matrix, matrix.T)
    assert matrix[0, 1] > 0


def test_mismatched_dimensions_are_rejected() -> None:
    with pytest.raises(FeatureError, match="different dimensions"):
        distance(np.zeros(3), np.zeros(4))
    with pytest.raises(FeatureError):
        pairwise([])


def test_csv_layouts(fixture_text) -> None:
    vector = featurize(parse_spec(fixture_text("product.emini")))

    rows = feature_rows_csv([("product", vector)]).splitlines()
    assert rows[0] == ",".join(["spec", *FEATURE_NAMES])
    assert rows[1].startswith("product,")
    assert rows[1].split(",")[FEATURE_NAMES.index("node_count") + 1] == "16"

    matrix = distance_matrix_csv(["a", "b"], np.array([[0.0, 1.5], [1.5, 0.0]])).splitlines()
    assert matrix == ["spec,a,b", "a,0.000000,1.500000", "b,1.500000,0.000000"]


def test_shape_features_close_the_vector() -> None:
    assert FEATURE_NAMES[-len(SHAPE_FEATURES):] == SHAPE_FEATURES
