from __future__ import annotations

import pytest

from reformine.domain.models import GeneratorConfig
from reformine.services.grounding import ground
from reformine.services.instance_generator import GeneratorError, RejectionLimitError, sample_instances
from reformine.services.spec_parser import parse_spec


def test_seeded_sampling_is_reproducible() -> None:
    ast = parse_spec("given n : int(1..10)\nfind x : int(0..n)")
    config = GeneratorConfig(count=3, seed=11)

    first = sample_instances(ast, config)
    second = sample_instances(ast, config)

    assert [i.name for i in first] == ["instance-001", "instance-002", "instance-003"]
    assert all(1 <= i.bindings["n"] <= 10 for i in first)
    assert [i.bindings for i in first] == [i.bindings for i in second]


def test_where_clauses_filter_samples() -> None:
    ast = parse_spec("given n : int(1..10)\nwhere n % 2 = 0\nfind x : int(0..n)")

    instances = sample_instances(ast, GeneratorConfig(count=20, seed=3))

    assert all(i.bindings["n"] % 2 == 0 for i in instances)


def test_unsatisfiable_guard_hits_the_rejection_limit() -> None:
    ast = parse_spec("given n : int(1..10)\nwhere false\nfind x : int(0..n)")

    with pytest.raises(RejectionLimitError, match="where clause violated"):
        sample_instances(ast, GeneratorConfig(count=1, seed=0, max_rejections=25))


def test_ranges_and_cap_bound_unbounded_givens() -> None:
    ast = parse_spec("given n_boats, n_periods : int(1..)\nfind x : int(0..n_boats)")
    config = GeneratorConfig(count=30, seed=5, cap=4, ranges={"n_periods": (2, 3)})

    instances = sample_instances(ast, config)

    assert all(1 <= i.bindings["n_boats"] <= 5 for i in instances)
    assert {i.bindings["n_periods"] for i in instances} <= {2, 3}


def test_relations_follow_density_and_size_attributes() -> None:
    ast = parse_spec(
        "given k : int(1..3)\n"
        "given S : set (size k) of int(1..6)\n"
        "given R : relation of (int(1..3) * int(1..3))\n"
        "find x : int(0..1)"
    )

    instances = sample_instances(ast, GeneratorConfig(count=10, seed=2, density=1.0))

    for instance in instances:
        assert len(instance.bindings["S"]) == instance.bindings["k"]
        assert len(instance.bindings["R"]) == 9
        ground(ast, instance)


def test_booleans_and_lettings_are_supported() -> None:
    ast = parse_spec(
        "given n : int(1..4)\n"
        "letting m be n + 1\n"
        "given flag : bool\n"
        "given D : set of int(1..m)\n"
        "find x : int(0..m)"
    )

    instances = sample_instances(ast, GeneratorConfig(count=12, seed=9))

    assert {type(i.bindings["flag"]) for i in instances} == {bool}
    for instance in instances:
        assert all(row[0] <= instance.bindings["n"] + 1 for row in instance.bindings["D"])


def test_spec_without_givens_is_an_error() -> None:
    with pytest.raises(GeneratorError, match="no given"):
        sample_instances(parse_spec("find x : int(0..3)"), GeneratorConfig())


def test_empty_sampling_range_is_rejected_by_the_config() -> None:
    with pytest.raises(ValueError):
        GeneratorConfig(ranges={"n": (3, 1)})
