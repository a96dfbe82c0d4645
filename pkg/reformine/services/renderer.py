from __future__ import annotations

from pathlib import Path
from typing import Any

from jinja2 import Environment, FileSystemLoader, StrictUndefined

from reformine.services.paths import templates_dir as default_templates_dir


def dot_escape(value: object) -> str:
    return str(value).replace("\\", "\\\\").replace('"', '\\"')


class TemplateRenderService:
    """Renders the packaged text formats (GP2 host graphs, DOT, instance files)."""

    def __init__(self, template_root: Path | None = None) -> None:
        self.template_root = template_root or default_templates_dir()
        self.env = Environment(
            loader=FileSystemLoader(str(self.template_root)),
            autoescape=False,
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=True,
            undefined=StrictUndefined,
        )
        self.env.filters["dot_escape"] = dot_escape

    def render(self, template_name: str, **context: Any) -> str:
        return self.env.get_template(template_name).render(**context)
