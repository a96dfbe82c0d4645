from __future__ import annotations

import math
from typing import Any, Literal

from pydantic import BaseModel, Field, model_validator


Severity = Literal["blocking", "warning"]
SolveMode = Literal["first", "all", "optimize"]
SolveStatus = Literal["sat", "unsat", "optimal", "node-budget-exhausted"]
GraphFormat = Literal["gp2", "dot", "json"]
InstanceFormat = Literal["param", "json"]
SearchEventKind = Literal["evaluate", "expand", "duplicate", "best"]
BindingValue = int | bool | frozenset[tuple[int, ...]]

DEFAULT_FLATTEN_CAP = 1_000_000


class ValidationFinding(BaseModel):
    severity: Severity
    code: str
    message: str
    field: str | None = None
    line: int | None = None
    column: int | None = None


class ValidationReport(BaseModel):
    findings: list[ValidationFinding] = Field(default_factory=list)

    def add(
        self,
        severity: Severity,
        code: str,
        message: str,
        field: str | None = None,
        position: tuple[int, int] | None = None,
    ) -> None:
        line, column = position if position is not None else (None, None)
        self.findings.append(
            ValidationFinding(
                severity=severity, code=code, message=message, field=field, line=line, column=column
            )
        )

    @property
    def has_blocking(self) -> bool:
        return any(f.severity == "blocking" for f in self.findings)

    @property
    def has_warnings(self) -> bool:
        return any(f.severity == "warning" for f in self.findings)

    def first_blocking(self) -> ValidationFinding | None:
        for finding in self.findings:
            if finding.severity == "blocking":
                return finding
        return None


class Instance(BaseModel):
    """Values for the givens of one specification; relations are sets of int tuples."""

    name: str = "instance"
    bindings: dict[str, BindingValue] = Field(default_factory=dict)


class GraphVertex(BaseModel):
    index: int = Field(ge=0)
    label: str


class GraphEdge(BaseModel):
    index: int = Field(ge=0)
    source: int = Field(ge=0)
    target: int = Field(ge=0)
    label: int = Field(ge=1)


class GraphDoc(BaseModel):
    vertices: list[GraphVertex] = Field(default_factory=list)
    edges: list[GraphEdge] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_indices(self) -> "GraphDoc":
        indices = [v.index for v in self.vertices]
        if sorted(indices) != list(range(len(indices))):
            raise ValueError("vertex indices must be unique and dense from 0")
        edge_indices = [e.index for e in self.edges]
        if len(set(edge_indices)) != len(edge_indices):
            raise ValueError("edge indices must be unique")
        for edge in self.edges:
            if edge.source >= len(indices) or edge.target >= len(indices):
                raise ValueError(f"edge {edge.index} references a missing vertex")
        return self


class MatchView(BaseModel):
    rule: str
    index: int = Field(ge=0)
    path: list[int]
    node: str


class RewriteTrace(BaseModel):
    rule: str
    path: list[int]
    before_hash: str
    after_hash: str


class SolveSettings(BaseModel):
    mode: SolveMode = "first"
    budget: int = Field(default=100_000, ge=1)
    flatten_cap: int = Field(default=DEFAULT_FLATTEN_CAP, ge=1)


class SolveResult(BaseModel):
    status: SolveStatus
    solutions: list[dict[str, Any]] = Field(default_factory=list)
    objective: int | None = None
    nodes: int = Field(default=0, ge=0)
    failures: int = Field(default=0, ge=0)
    millis: float = Field(default=0.0, ge=0)

    @model_validator(mode="after")
    def validate_counts(self) -> "SolveResult":
        if self.failures > self.nodes:
            raise ValueError("failures cannot exceed expanded nodes")
        if self.status == "optimal" and self.objective is None:
            raise ValueError("optimal result requires an objective value")
        return self


class ExploreConfig(BaseModel):
    iterations: int = Field(default=100, ge=0)
    uct_c: float = Field(default=math.sqrt(2), ge=0)
    budget: int = Field(default=100_000, ge=1)
    max_depth: int = Field(default=8, ge=0)
    seed: int = Field(default=0, ge=0, lt=2**64)
    instances: list[Instance] = Field(default_factory=list)
    rules: list[str] | None = None
    jobs: int = Field(default=1, ge=1)
    flatten_cap: int = Field(default=DEFAULT_FLATTEN_CAP, ge=1)


class GeneratorConfig(BaseModel):
    count: int = Field(default=1, ge=1)
    ranges: dict[str, tuple[int, int]] = Field(default_factory=dict)
    cap: int = Field(default=50, ge=0)
    density: float = Field(default=0.5, ge=0.0, le=1.0)
    seed: int = Field(default=0, ge=0, lt=2**64)
    max_rejections: int = Field(default=1000, ge=1)

    @model_validator(mode="after")
    def validate_ranges(self) -> "GeneratorConfig":
        for name, (lo, hi) in self.ranges.items():
            if lo > hi:
                raise ValueError(f"sampling range for '{name}' is empty")
        return self


class InstanceEvaluation(BaseModel):
    instance: str
    status: SolveStatus
    nodes: int = Field(ge=0)


class SequenceStep(BaseModel):
    rule: str
    path: list[int]


class BaselineReport(BaseModel):
    nodes: int = Field(ge=0)
    reward: float = Field(ge=0.0, le=1.0)
    canonical: str
    per_instance: list[InstanceEvaluation] = Field(default_factory=list)


class CandidateReport(BaseModel):
    spec_text: str
    sequence: list[SequenceStep] = Field(default_factory=list)
    nodes: int = Field(ge=0)
    reward: float = Field(ge=0.0, le=1.0)
    canonical: str


class TreeSummary(BaseModel):
    expanded: int = Field(ge=0)
    duplicates: int = Field(ge=0)
    depth_histogram: dict[str, int] = Field(default_factory=dict)


class NodeStats(BaseModel):
    id: int = Field(ge=0)
    parent: int | None = None
    depth: int = Field(ge=0)
    rule: str | None = None
    path: list[int] | None = None
    canonical: str
    visits: int = Field(ge=0)
    total_reward: float = Field(ge=0.0)
    reward: float = Field(ge=0.0, le=1.0)
    nodes: int = Field(ge=0)
    duplicate: bool = False
    terminal: bool = False


class SearchEvent(BaseModel):
    """One search-tree event; ``before_hash`` is the parent's canonical hash."""

    event: SearchEventKind
    node: int = Field(ge=0)
    depth: int = Field(ge=0)
    canonical: str
    nodes: int = Field(ge=0)
    reward: float = Field(ge=0.0, le=1.0)
    parent: int | None = None
    rule: str | None = None
    match_index: int | None = None
    path: list[int] | None = None
    before_hash: str | None = None


class ExploreReport(BaseModel):
    seed: int
    iterations: int
    baseline: BaselineReport
    best: CandidateReport
    tree_summary: TreeSummary
    nodes: list[NodeStats] = Field(default_factory=list)
    timing: dict[str, float] = Field(default_factory=dict)


class CommandOutcome(BaseModel):
    exit_code: int = 0
    stdout: str = ""
    stderr: str = ""
