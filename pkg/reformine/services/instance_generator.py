from __future__ import annotations

import logging
import random
from itertools import product

from reformine.domain.ast import (
    BoolDomain,
    Domain,
    DomainRef,
    Expr,
    GivenStmt,
    IntDomain,
    LettingStmt,
    RelationDomain,
    SpecAst,
    DOMAIN_TYPES,
)
from reformine.domain.errors import ReformineError
from reformine.domain.models import BindingValue, GeneratorConfig, Instance
from reformine.services.evaluator import EvaluationError, Value, evaluate
from reformine.services.grounding import GroundingError, ground


LOG = logging.getLogger(__name__)


class GeneratorError(ReformineError):
    """Raised when instances cannot be sampled for a specification."""


class RejectionLimitError(GeneratorError):
    """Raised when too many consecutive samples fail the where clauses."""


class _Rejected(Exception):
    pass


class _Sampler:
    def __init__(self, ast: SpecAst, config: GeneratorConfig, rng: random.Random) -> None:
        self.ast = ast
        self.config = config
        self.rng = rng

    def draw(self) -> dict[str, BindingValue]:
        env: dict[str, Value] = {}
        aliases: dict[str, Domain] = {}
        bindings: dict[str, BindingValue] = {}
        for statement in self.ast.statements:
            if isinstance(statement, LettingStmt):
                if isinstance(statement.value, DOMAIN_TYPES):
                    aliases[statement.name] = statement.value
                else:
                    env[statement.name] = self._evaluate(statement.value, env)
            elif isinstance(statement, GivenStmt):
                domain = self._resolve(statement.domain, aliases)
                for name in statement.names:
                    value = self._sample(name, domain, env)
                    bindings[name] = value
                    env[name] = value
        return bindings

    def _evaluate(self, expr: Expr, env: dict[str, Value]) -> Value:
        try:
            return evaluate(expr, env)
        except EvaluationError as exc:
            raise _Rejected(exc.message) from exc

    def _resolve(self, domain: Domain, aliases: dict[str, Domain]) -> Domain:
        if isinstance(domain, DomainRef):
            return self._resolve(aliases[domain.name], aliases)
        if isinstance(domain, RelationDomain):
            components = tuple(self._resolve(c, aliases) for c in domain.components)
            return RelationDomain(components, domain.attrs, domain.is_set)
        return domain

    def _int_range(self, name: str, domain: IntDomain, env: dict[str, Value]) -> tuple[int, int]:
        lo = self._evaluate(domain.lo, env)
        hi = lo + self.config.cap if domain.hi is None else self._evaluate(domain.hi, env)
        hi = min(hi, lo + self.config.cap)
        if name in self.config.ranges:
            wanted_lo, wanted_hi = self.config.ranges[name]
            lo, hi = max(lo, wanted_lo), min(hi, wanted_hi)
        if lo > hi:
            raise _Rejected(f"empty sampling range for '{name}'")
        return lo, hi

    def _sample(self, name: str, domain: Domain, env: dict[str, Value]) -> BindingValue:
        if isinstance(domain, BoolDomain):
            return self.rng.random() < 0.5
        if isinstance(domain, IntDomain):
            return self.rng.randint(*self._int_range(name, domain, env))
        columns = []
        for component in domain.components:
            if isinstance(component, BoolDomain):
                raise GeneratorError(f"given '{name}' has boolean tuple components")
            lo, hi = self._int_range(name, component, env)
            columns.append(range(lo, hi + 1))
        candidates = list(product(*columns))
        for attribute in domain.attrs:
            if attribute.name == "size":
                size = self._evaluate(attribute.value, env)
                if not 0 <= size <= len(candidates):
                    raise _Rejected(f"size {size} of '{name}' cannot be met")
                return frozenset(self.rng.sample(candidates, size))
        return frozenset(row for row in candidates if self.rng.random() < self.config.density)


def sample_instances(ast: SpecAst, config: GeneratorConfig, *, prefix: str = "instance") -> list[Instance]:
    """Seeded rejection sampling of instances that ground against ``ast``."""
    if not ast.givens():
        raise GeneratorError("specification declares no given parameters")
    rng = random.Random(config.seed)
    sampler = _Sampler(ast, config, rng)
    instances: list[Instance] = []
    width = max(3, len(str(config.count)))
    while len(instances) < config.count:
        rejections = 0
        while True:
            try:
                bindings = sampler.draw()
                instance = Instance(name=f"{prefix}-{len(instances) + 1:0{width}d}", bindings=bindings)
                ground(ast, instance)
                break
            except (_Rejected, GroundingError) as exc:
                rejections += 1
                LOG.debug("rejected sample: %s", exc)
                if rejections >= config.max_rejections:
                    raise RejectionLimitError(
                        f"{rejections} consecutive samples were rejected; last reason: {exc}"
                    ) from exc
        instances.append(instance)
    LOG.info("sampled %d instances with seed %d", len(instances), config.seed)
    return instances
