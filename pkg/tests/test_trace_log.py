from __future__ import annotations

import json

import pytest
from pydantic import ValidationError

from reformine.domain.models import SearchEvent
from reformine.services.rewrite_engine import enumerate_matches, get_rule, trace
from reformine.services.spec_parser import parse_spec
from reformine.services.trace_log import TraceLogService


def test_trace_log_service_writes_json_lines(tmp_path) -> None:
    log_path = tmp_path / "logs" / "trace.log"
    service = TraceLogService(log_path=log_path)

    service.log_event("evaluate", nodes=12, instances=2)
    service.log_event("duplicate", node=3)

    lines = log_path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2

    first = json.loads(lines[0])
    second = json.loads(lines[1])
    assert first["action"] == "evaluate"
    assert first["nodes"] == 12
    assert "timestamp" in first
    assert second["action"] == "duplicate"
    assert second["node"] == 3


def test_rewrite_records_are_logged_with_extra_fields(tmp_path, fixture_text) -> None:
    log_path = tmp_path / "trace.log"
    ast = parse_spec(fixture_text("product.emini"))
    rule = get_rule("commute")

    TraceLogService(log_path).log_trace(trace(rule, ast, enumerate_matches(rule, ast)[0]), source="product.emini")

    entry = json.loads(log_path.read_text(encoding="utf-8"))
    assert entry["action"] == "rewrite"
    assert entry["rule"] == "commute"
    assert entry["path"] == [2, 1]
    assert entry["source"] == "product.emini"
    assert entry["before_hash"] == entry["after_hash"]


def test_unwritable_log_is_ignored(tmp_path) -> None:
    blocker = tmp_path / "blocker"
    blocker.write_text("not a directory", encoding="utf-8")

    TraceLogService(blocker / "trace.log").log_event("evaluate", nodes=1)

    assert blocker.read_text(encoding="utf-8") == "not a directory"


def test_search_events_leave_out_unset_fields(tmp_path) -> None:
    service = TraceLogService(tmp_path / "trace.log")

    service.log_search(SearchEvent(event="evaluate", node=0, depth=0, canonical="ab" * 8, nodes=40, reward=0.5))
    service.log_search(
        SearchEvent(
            event="expand",
            node=1,
            depth=1,
            canonical="cd" * 8,
            nodes=0,
            reward=1.0,
            parent=0,
            rule="implied-sum",
            match_index=0,
            path=[5, 1],
            before_hash="ab" * 8,
        )
    )

    root, child = service.read_events()
    assert root["action"] == "evaluate"
    assert root["nodes"] == 40
    assert {"parent", "rule", "path", "before_hash", "event"}.isdisjoint(root)
    assert child["action"] == "expand"
    assert child["path"] == [5, 1]
    assert child["before_hash"] == root["canonical"]


def test_search_event_reward_is_a_ratio() -> None:
    with pytest.raises(ValidationError):
        SearchEvent(event="best", node=0, depth=0, canonical="0" * 16, nodes=0, reward=1.5)


def test_missing_log_reads_as_empty(tmp_path) -> None:
    assert TraceLogService(tmp_path / "absent.log").read_events() == []
