"""Monte Carlo tree search over rewrite sequences.

Every node holds a specification; its untried actions are the
``(rule name, match index)`` pairs available in it. A step selects by UCT,
expands one uniformly chosen untried action, evaluates the new specification
on the training instances and backpropagates the reward. Specifications whose
canonical hash was seen before are recorded as terminal duplicates and reuse
the earlier reward.
"""

from __future__ import annotations

import logging
import math
import random
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator

from reformine.domain.ast import SpecAst
from reformine.domain.errors import ReformineError
from reformine.domain.models import (
    BaselineReport,
    CandidateReport,
    ExploreConfig,
    ExploreReport,
    Instance,
    InstanceEvaluation,
    NodeStats,
    SearchEvent,
    SearchEventKind,
    SequenceStep,
    SolveMode,
    TreeSummary,
)
from reformine.services.flatten import flatten
from reformine.services.grounding import ground
from reformine.services.renderer import TemplateRenderService
from reformine.services.rewrite_engine import apply, canonical_hash, enumerate_matches, rule_library
from reformine.services.rewrite_rules import RewriteRule
from reformine.services.solver import solve
from reformine.services.spec_printer import pretty
from reformine.services.trace_log import TraceLogService


LOG = logging.getLogger(__name__)

Action = tuple[str, int]


class ExploreError(ReformineError):
    """Raised when the original specification cannot be evaluated on the training instances."""


@dataclass(eq=False, slots=True)
class SearchNode:
    id: int
    spec: SpecAst
    canonical: str
    parent: SearchNode | None = None
    action: Action | None = None
    match_path: tuple[int, ...] | None = None
    depth: int = 0
    untried: list[Action] = field(default_factory=list)
    children: list[SearchNode] = field(default_factory=list)
    visits: int = 0
    total_reward: float = 0.0
    reward: float = 0.0
    nodes: int = 0
    duplicate: bool = False

    @property
    def terminal(self) -> bool:
        return not self.untried and not self.children

    @property
    def mean(self) -> float:
        return self.total_reward / self.visits if self.visits else 0.0

    def sequence(self) -> list[SequenceStep]:
        steps: list[SequenceStep] = []
        node: SearchNode | None = self
        while node is not None and node.action is not None:
            steps.append(SequenceStep(rule=node.action[0], path=list(node.match_path or ())))
            node = node.parent
        return steps[::-1]

    def walk(self) -> Iterator[SearchNode]:
        yield self
        for child in self.children:
            yield from child.walk()


def uct_score(child: SearchNode, parent_visits: int, c: float) -> float:
    if child.visits == 0:
        return math.inf
    return child.mean + c * math.sqrt(math.log(parent_visits) / child.visits)


def reward(candidate_nodes: int, baseline_nodes: int) -> float:
    return baseline_nodes / (baseline_nodes + candidate_nodes)


def evaluate_instance(
    spec: SpecAst,
    instance: Instance,
    budget: int,
    mode: SolveMode,
    flatten_cap: int,
) -> InstanceEvaluation:
    csp = flatten(ground(spec, instance, source=instance.name), cap=flatten_cap)
    result = solve(csp, budget, mode)
    return InstanceEvaluation(instance=instance.name, status=result.status, nodes=min(result.nodes, budget))


def _evaluate_candidate(task: tuple[SpecAst, Instance, int, SolveMode, int]) -> InstanceEvaluation:
    spec, instance, budget, mode, cap = task
    try:
        return evaluate_instance(spec, instance, budget, mode, cap)
    except ReformineError as exc:
        # Counted as a censored run at the full budget.
        LOG.warning("candidate evaluation on %s failed: %s", instance.name, exc)
        return InstanceEvaluation(instance=instance.name, status="node-budget-exhausted", nodes=budget)


def _actions(spec: SpecAst, rules: list[RewriteRule]) -> list[Action]:
    return [(rule.name, index) for rule in rules for index in range(len(enumerate_matches(rule, spec)))]


class MctsExplorer:
    def __init__(
        self,
        spec: SpecAst,
        config: ExploreConfig,
        *,
        trace_log: TraceLogService | None = None,
    ) -> None:
        if not config.instances:
            raise ExploreError("exploration needs at least one training instance")
        self.config = config
        self.rules = rule_library(config.rules)
        self.rules_by_name = {rule.name: rule for rule in self.rules}
        self.mode: SolveMode = "optimize" if spec.objective() is not None else "first"
        self.rng = random.Random(config.seed)
        self.trace_log = trace_log
        self.seen: dict[str, SearchNode] = {}
        self.evaluation_seconds = 0.0
        self._executor: ProcessPoolExecutor | None = None
        self._next_id = 0
        self.baseline_evaluations = self._evaluate_baseline(spec)
        self.baseline_nodes = max(1, sum(e.nodes for e in self.baseline_evaluations))
        self.root = self._new_node(spec, canonical_hash(spec), parent=None, action=None, match_path=None)
        self.root.nodes = sum(e.nodes for e in self.baseline_evaluations)
        self.root.reward = reward(self.root.nodes, self.baseline_nodes)
        self.root.visits = 1
        self.root.total_reward = self.root.reward
        self.seen[self.root.canonical] = self.root
        self._trace("evaluate", self.root)

    def _new_node(
        self,
        spec: SpecAst,
        canonical: str,
        *,
        parent: SearchNode | None,
        action: Action | None,
        match_path: tuple[int, ...] | None,
    ) -> SearchNode:
        depth = 0 if parent is None else parent.depth + 1
        node = SearchNode(
            id=self._next_id,
            spec=spec,
            canonical=canonical,
            parent=parent,
            action=action,
            match_path=match_path,
            depth=depth,
        )
        self._next_id += 1
        if depth < self.config.max_depth and canonical not in self.seen:
            node.untried = _actions(spec, self.rules)
        return node

    def _trace(self, kind: SearchEventKind, node: SearchNode) -> None:
        if self.trace_log is None:
            return
        parent = node.parent
        self.trace_log.log_search(
            SearchEvent(
                event=kind,
                node=node.id,
                depth=node.depth,
                canonical=node.canonical,
                nodes=node.nodes,
                reward=node.reward,
                parent=None if parent is None else parent.id,
                rule=None if node.action is None else node.action[0],
                match_index=None if node.action is None else node.action[1],
                path=None if node.match_path is None else list(node.match_path),
                before_hash=None if parent is None else parent.canonical,
            )
        )

    def _evaluate_baseline(self, spec: SpecAst) -> list[InstanceEvaluation]:
        started = time.perf_counter()
        evaluations = []
        for instance in self.config.instances:
            try:
                evaluations.append(
                    evaluate_instance(spec, instance, self.config.budget, self.mode, self.config.flatten_cap)
                )
            except ReformineError as exc:
                raise ExploreError(
                    f"instance '{instance.name}' cannot be evaluated: {exc.message}",
                    source=exc.source,
                    line=exc.line,
                    column=exc.column,
                ) from exc
        self.evaluation_seconds += time.perf_counter() - started
        return evaluations

    def _evaluate(self, spec: SpecAst) -> int:
        started = time.perf_counter()
        tasks = [
            (spec, instance, self.config.budget, self.mode, self.config.flatten_cap)
            for instance in self.config.instances
        ]
        if self.config.jobs > 1 and len(tasks) > 1:
            if self._executor is None:
                self._executor = ProcessPoolExecutor(max_workers=self.config.jobs)
            evaluations = list(self._executor.map(_evaluate_candidate, tasks))
        else:
            evaluations = [_evaluate_candidate(task) for task in tasks]
        self.evaluation_seconds += time.perf_counter() - started
        return sum(e.nodes for e in evaluations)

    def _select(self) -> list[SearchNode]:
        path = [self.root]
        node = self.root
        while not node.untried and node.children:
            parent_visits = node.visits
            node = max(node.children, key=lambda child: uct_score(child, parent_visits, self.config.uct_c))
            path.append(node)
        return path

    def _expand(self, node: SearchNode) -> SearchNode:
        rule_name, index = node.untried.pop(self.rng.randrange(len(node.untried)))
        rule = self.rules_by_name[rule_name]
        match = enumerate_matches(rule, node.spec)[index]
        spec = apply(rule, node.spec, match)
        canonical = canonical_hash(spec)
        child = self._new_node(spec, canonical, parent=node, action=(rule_name, index), match_path=match.path)
        earlier = self.seen.get(canonical)
        if earlier is not None:
            child.duplicate = True
            child.reward = earlier.reward
            child.nodes = earlier.nodes
        else:
            child.nodes = self._evaluate(spec)
            child.reward = reward(child.nodes, self.baseline_nodes)
            self.seen[canonical] = child
        node.children.append(child)
        LOG.debug(
            "expanded #%d via %s[%d] -> #%d reward %.4f%s",
            node.id,
            rule_name,
            index,
            child.id,
            child.reward,
            " (duplicate)" if child.duplicate else "",
        )
        self._trace("duplicate" if child.duplicate else "expand", child)
        return child

    def step(self) -> SearchNode:
        """One selection, expansion, evaluation and backpropagation; returns the evaluated node."""
        path = self._select()
        leaf = path[-1]
        if leaf.untried:
            leaf = self._expand(leaf)
            path.append(leaf)
        value = leaf.reward
        for node in path:
            node.visits += 1
            node.total_reward += value
        return leaf

    def best(self) -> SearchNode:
        candidates = [node for node in self.root.walk() if not node.duplicate]
        return min(candidates, key=lambda node: (-node.reward, node.depth, node.id))

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown()
            self._executor = None

    def run(self) -> ExploreReport:
        started = time.perf_counter()
        try:
            for _ in range(self.config.iterations):
                self.step()
        finally:
            self.close()
        self._trace("best", self.best())
        return self.report(total_seconds=time.perf_counter() - started)

    def report(self, *, total_seconds: float = 0.0) -> ExploreReport:
        nodes = sorted(self.root.walk(), key=lambda node: node.id)
        best = self.best()
        expanded = [node for node in nodes if node.parent is not None]
        histogram = Counter(node.depth for node in expanded)
        return ExploreReport(
            seed=self.config.seed,
            iterations=self.config.iterations,
            baseline=BaselineReport(
                nodes=self.root.nodes,
                reward=self.root.reward,
                canonical=self.root.canonical,
                per_instance=self.baseline_evaluations,
            ),
            best=CandidateReport(
                spec_text=pretty(best.spec),
                sequence=best.sequence(),
                nodes=best.nodes,
                reward=best.reward,
                canonical=best.canonical,
            ),
            tree_summary=TreeSummary(
                expanded=len(expanded),
                duplicates=sum(1 for node in expanded if node.duplicate),
                depth_histogram={str(depth): histogram[depth] for depth in sorted(histogram)},
            ),
            nodes=[
                NodeStats(
                    id=node.id,
                    parent=None if node.parent is None else node.parent.id,
                    depth=node.depth,
                    rule=None if node.action is None else node.action[0],
                    path=None if node.match_path is None else list(node.match_path),
                    canonical=node.canonical,
                    visits=node.visits,
                    total_reward=node.total_reward,
                    reward=node.reward,
                    nodes=node.nodes,
                    duplicate=node.duplicate,
                    terminal=node.terminal,
                )
                for node in nodes
            ],
            timing={
                "total_ms": round(total_seconds * 1000.0, 3),
                "evaluation_ms": round(self.evaluation_seconds * 1000.0, 3),
            },
        )


def explore(
    spec: SpecAst,
    config: ExploreConfig,
    *,
    trace_log: TraceLogService | None = None,
) -> ExploreReport:
    explorer = MctsExplorer(spec, config, trace_log=trace_log)
    report = explorer.run()
    LOG.info(
        "explored %d nodes: baseline %d solver nodes, best %d (reward %.4f)",
        len(report.nodes),
        report.baseline.nodes,
        report.best.nodes,
        report.best.reward,
    )
    return report


def export_tree_dot(report: ExploreReport, renderer: TemplateRenderService | None = None) -> str:
    renderer = renderer or TemplateRenderService()
    best_id = next(
        (node.id for node in report.nodes if node.canonical == report.best.canonical and not node.duplicate),
        None,
    )
    rows = [
        {
            "id": node.id,
            "parent": node.parent,
            "label": f"#{node.id} r={node.reward:.3f} n={node.visits} nodes={node.nodes}",
            "duplicate": node.duplicate,
            "best": node.id == best_id,
            "action": "" if node.rule is None else f"{node.rule} @ {node.path}",
        }
        for node in report.nodes
    ]
    return renderer.render("search_tree.dot.j2", nodes=rows)
