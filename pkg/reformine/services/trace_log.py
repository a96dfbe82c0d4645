"""JSON-lines trace of rewrite applications and search-tree events."""

from __future__ import annotations

import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from reformine.domain.models import RewriteTrace, SearchEvent
from reformine.services.paths import default_trace_log


class TraceLogService:
    """Append-only log; every line carries a UTC ``timestamp`` and an ``action``."""

    def __init__(self, log_path: Path | None = None) -> None:
        self.log_path = (log_path or default_trace_log()).expanduser()

    def log_event(self, action: str, **fields: Any) -> None:
        payload: dict[str, Any] = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "action": action,
        }
        payload.update(fields)
        self._append_json_line(payload)

    def log_trace(self, record: RewriteTrace, **fields: Any) -> None:
        self.log_event("rewrite", **record.model_dump(), **fields)

    def log_search(self, event: SearchEvent) -> None:
        """Search events are logged under their kind; unset fields are left out."""
        self.log_event(event.event, **event.model_dump(exclude={"event"}, exclude_none=True))

    def read_events(self) -> list[dict[str, Any]]:
        if not self.log_path.exists():
            return []
        lines = self.log_path.read_text(encoding="utf-8").splitlines()
        return [json.loads(line) for line in lines if line.strip()]

    def _append_json_line(self, payload: dict[str, Any]) -> None:
        try:
            self.log_path.parent.mkdir(parents=True, exist_ok=True)
            with self.log_path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(payload, sort_keys=True) + "\n")
        except OSError:
            # Tracing must never abort a rewrite or a search.
            return
