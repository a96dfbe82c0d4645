from __future__ import annotations

import os
from pathlib import Path


def app_root() -> Path:
    return Path(__file__).resolve().parents[1]


def templates_dir() -> Path:
    return app_root() / "templates"


def schemas_dir() -> Path:
    return app_root() / "schemas"


def user_data_dir() -> Path:
    configured = (os.getenv("REFORMINE_HOME") or "").strip()
    if configured:
        return Path(configured).expanduser()
    return Path.home() / ".reformine"


def default_trace_log() -> Path:
    return user_data_dir() / "logs" / "traces.log"
