from __future__ import annotations

import json

import pytest

from reformine.domain.models import Instance
from reformine.services.instance_store import InstanceFormatError, InstanceStoreService, dump_instance, load_instance


def _instance() -> Instance:
    return Instance(
        name="sample",
        bindings={
            "n": 4,
            "offset": -2,
            "strict": True,
            "hosts": frozenset({(2,), (1,)}),
            "crew": frozenset({(1, 4), (2, 3)}),
            "none": frozenset(),
        },
    )


def test_param_text_binds_literal_values() -> None:
    service = InstanceStoreService()

    instance = service.parse_param(
        "$ party sizes\n"
        "letting n be 4\n"
        "letting offset be -2\n"
        "letting strict be true\n"
        "letting hosts be relation {2, 1}\n"
        "letting crew be relation {(2, 3), (1, 4)}\n"
        "letting none be relation {}\n",
        name="sample",
    )

    assert instance == _instance()


def test_param_dump_keeps_binding_order() -> None:
    text = dump_instance(_instance())

    assert text.splitlines() == [
        "letting n be 4",
        "letting offset be -2",
        "letting strict be true",
        "letting hosts be relation {1, 2}",
        "letting crew be relation {(1, 4), (2, 3)}",
        "letting none be relation {}",
    ]
    assert InstanceStoreService().parse_param(text, name="sample") == _instance()


def test_json_dump_and_parse() -> None:
    service = InstanceStoreService()

    text = service.dump(_instance(), "json")

    payload = json.loads(text)
    assert payload["hosts"] == [1, 2]
    assert payload["crew"] == [[1, 4], [2, 3]]
    assert payload["strict"] is True
    assert service.parse_json(text, name="sample") == _instance()


def test_param_rejects_non_letting_lines() -> None:
    with pytest.raises(InstanceFormatError, match="only contain letting lines") as excinfo:
        InstanceStoreService().parse_param("letting n be 3\nfind x : bool", source="bad.param")

    assert excinfo.value.line == 2
    assert excinfo.value.location().startswith("bad.param:2")


def test_param_rejects_duplicates_and_expressions() -> None:
    service = InstanceStoreService()

    with pytest.raises(InstanceFormatError, match="bound twice"):
        service.parse_param("letting n be 3\nletting n be 4")
    with pytest.raises(InstanceFormatError, match="must be a literal"):
        service.parse_param("letting n be 3 + 1")
    with pytest.raises(InstanceFormatError):
        service.parse_param("letting n be")


def test_json_errors_are_reported() -> None:
    service = InstanceStoreService()

    with pytest.raises(InstanceFormatError) as excinfo:
        service.parse_json('{"n": 3,\n  }', source="bad.json")
    assert excinfo.value.line == 2

    with pytest.raises(InstanceFormatError, match="schema"):
        service.parse_json('{"n": "three"}')
    with pytest.raises(InstanceFormatError, match="schema"):
        service.parse_json('{"2n": 3}')
    with pytest.raises(InstanceFormatError, match="mixes tuple arities"):
        service.parse_json('{"R": [[1, 2], [3]]}')


def test_write_and_load_directory_round_trip(tmp_path) -> None:
    service = InstanceStoreService()
    first = Instance(name="b-instance", bindings={"n": 2})
    second = Instance(name="a-instance", bindings={"n": 5, "S": frozenset({(3,)})})

    written = service.write_instances([first], tmp_path, "param") + service.write_instances([second], tmp_path, "json")
    (tmp_path / "notes.txt").write_text("ignored", encoding="utf-8")

    assert [p.name for p in written] == ["b-instance.param", "a-instance.json"]
    assert service.load_directory(tmp_path) == [second, first]


def test_load_uses_the_file_stem_and_reports_missing_files(tmp_path) -> None:
    path = tmp_path / "small.param"
    path.write_text("letting n be 3\n", encoding="utf-8")

    assert load_instance(path) == Instance(name="small", bindings={"n": 3})

    with pytest.raises(InstanceFormatError, match="cannot read instance"):
        load_instance(tmp_path / "missing.param")
    with pytest.raises(InstanceFormatError, match="not a directory"):
        InstanceStoreService().load_directory(path)
