from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from jsonschema import Draft202012Validator
from pydantic import ValidationError

from reformine.domain.ast import BoolLit, IntLit, LettingStmt, RelationLit
from reformine.domain.errors import ReformineError
from reformine.domain.models import BindingValue, Instance, InstanceFormat
from reformine.services.paths import schemas_dir as default_schemas_dir
from reformine.services.renderer import TemplateRenderService
from reformine.services.spec_parser import SpecSyntaxError, parse_tree


INSTANCE_SUFFIXES = {".param": "param", ".json": "json"}


class InstanceFormatError(ReformineError):
    """Raised when an instance file cannot be read or does not follow the instance format."""


def _render_value(value: BindingValue) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    rows = sorted(value)
    if rows and len(rows[0]) == 1:
        return "relation {" + ", ".join(str(row[0]) for row in rows) + "}"
    return "relation {" + ", ".join("(" + ", ".join(str(v) for v in row) + ")" for row in rows) + "}"


def _json_value(value: BindingValue) -> Any:
    if isinstance(value, (bool, int)):
        return value
    rows = sorted(value)
    if rows and len(rows[0]) == 1:
        return [row[0] for row in rows]
    return [list(row) for row in rows]


class InstanceStoreService:
    def __init__(
        self,
        schema_root: Path | None = None,
        renderer: TemplateRenderService | None = None,
    ) -> None:
        self.schema_root = schema_root or default_schemas_dir()
        with (self.schema_root / "instance.schema.json").open("r", encoding="utf-8") as handle:
            self._validator = Draft202012Validator(json.load(handle))
        self.renderer = renderer or TemplateRenderService()

    def parse_param(self, text: str, *, name: str = "instance", source: str | None = None) -> Instance:
        try:
            ast = parse_tree(text, source)
        except SpecSyntaxError as exc:
            raise InstanceFormatError(exc.message, source=source, line=exc.line, column=exc.column) from exc
        bindings: dict[str, BindingValue] = {}
        for statement in ast.statements:
            line, column = statement.pos if statement.pos is not None else (None, None)
            if not isinstance(statement, LettingStmt):
                raise InstanceFormatError(
                    f"instance files may only contain letting lines, found {statement.token}",
                    source=source,
                    line=line,
                    column=column,
                )
            if statement.name in bindings:
                raise InstanceFormatError(f"'{statement.name}' is bound twice", source=source, line=line)
            value = statement.value
            if isinstance(value, (IntLit, BoolLit)):
                bindings[statement.name] = value.value
            elif isinstance(value, RelationLit):
                bindings[statement.name] = frozenset(value.tuples)
            else:
                raise InstanceFormatError(
                    f"value of '{statement.name}' must be a literal",
                    source=source,
                    line=line,
                    column=column,
                )
        return Instance(name=name, bindings=bindings)

    def parse_json(self, text: str, *, name: str = "instance", source: str | None = None) -> Instance:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InstanceFormatError(exc.msg, source=source, line=exc.lineno, column=exc.colno) from exc
        errors = list(self._validator.iter_errors(data))
        if errors:
            raise InstanceFormatError(f"instance schema validation failed: {errors[0].message}", source=source)
        bindings: dict[str, Any] = {}
        for key, value in data.items():
            if isinstance(value, list):
                bindings[key] = frozenset(tuple(row) if isinstance(row, list) else (row,) for row in value)
            else:
                bindings[key] = value
        arities = {
            key: {len(row) for row in value}
            for key, value in bindings.items()
            if isinstance(value, frozenset)
        }
        for key, found in arities.items():
            if len(found) > 1:
                raise InstanceFormatError(f"relation '{key}' mixes tuple arities", source=source)
        try:
            return Instance.model_validate({"name": name, "bindings": bindings})
        except ValidationError as exc:
            raise InstanceFormatError(str(exc), source=source) from exc

    def load(self, path: Path) -> Instance:
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise InstanceFormatError(f"cannot read instance: {exc.strerror}", source=str(path)) from exc
        if path.suffix == ".json":
            return self.parse_json(text, name=path.stem, source=str(path))
        return self.parse_param(text, name=path.stem, source=str(path))

    def load_directory(self, directory: Path) -> list[Instance]:
        if not directory.is_dir():
            raise InstanceFormatError("not a directory", source=str(directory))
        paths = sorted(p for p in directory.iterdir() if p.suffix in INSTANCE_SUFFIXES)
        return [self.load(path) for path in paths]

    def dump(self, instance: Instance, fmt: InstanceFormat = "param") -> str:
        if fmt == "json":
            payload = {key: _json_value(value) for key, value in instance.bindings.items()}
            return json.dumps(payload, indent=2) + "\n"
        rows = [(key, _render_value(value)) for key, value in instance.bindings.items()]
        return self.renderer.render("instance.param.j2", bindings=rows)

    def write_instances(
        self, instances: list[Instance], directory: Path, fmt: InstanceFormat = "param"
    ) -> list[Path]:
        directory.mkdir(parents=True, exist_ok=True)
        written: list[Path] = []
        for instance in instances:
            path = directory / f"{instance.name}.{fmt}"
            path.write_text(self.dump(instance, fmt), encoding="utf-8")
            written.append(path)
        return written


def load_instance(path: Path) -> Instance:
    return InstanceStoreService().load(path)


def dump_instance(instance: Instance, fmt: InstanceFormat = "param") -> str:
    return InstanceStoreService().dump(instance, fmt)
