from __future__ import annotations

import logging
import math
import time
from itertools import product

from reformine.domain.errors import ReformineError
from reformine.domain.models import SolveMode, SolveResult
from reformine.services.flatten import (
    App,
    Const,
    GroundCsp,
    Linear,
    Term,
    Var,
    evaluate_term,
    holds,
    variables_of,
)
from reformine.services.evaluator import UndefinedArithmetic, arithmetic


LOG = logging.getLogger(__name__)

BRUTE_FORCE_LIMIT = 2**20

# An interval is (lo, hi); None means every completion is undefined.
Interval = tuple[int, int] | None

UNKNOWN = (0, 1)


class BruteForceLimitError(ReformineError):
    """Raised when exhaustive enumeration would exceed the assignment limit."""


def _corners(op: str, a: tuple[int, int], b: tuple[int, int]) -> tuple[int, int]:
    values = [arithmetic(op, x, y) for x in a for y in b]
    return min(values), max(values)


def _divide(a: tuple[int, int], b: tuple[int, int]) -> Interval:
    if b == (0, 0):
        return None
    if b[0] > 0 or b[1] < 0:
        return _corners("/", a, b)
    bound = max(abs(a[0]), abs(a[1]))
    return -bound, bound


def _modulo(a: tuple[int, int], b: tuple[int, int]) -> Interval:
    if b == (0, 0):
        return None
    if a[0] == a[1] and b[0] == b[1]:
        value = a[0] % b[0]
        return value, value
    if b[0] > 0:
        return 0, b[1] - 1
    if b[1] < 0:
        return b[0] + 1, 0
    bound = max(abs(b[0]), abs(b[1])) - 1
    return -bound, bound


def _compare(op: str, a: tuple[int, int], b: tuple[int, int]) -> tuple[int, int]:
    if op == "=":
        if a[0] == a[1] == b[0] == b[1]:
            return 1, 1
        return (0, 0) if a[1] < b[0] or b[1] < a[0] else UNKNOWN
    if op == "!=":
        low, high = _compare("=", a, b)
        return 1 - high, 1 - low
    if op in (">", ">="):
        return _compare("<" if op == ">" else "<=", b, a)
    if op == "<":
        if a[1] < b[0]:
            return 1, 1
        return (0, 0) if a[0] >= b[1] else UNKNOWN
    if a[1] <= b[0]:
        return 1, 1
    return (0, 0) if a[0] > b[1] else UNKNOWN


def _truth(value: tuple[int, int]) -> tuple[int, int]:
    """Booleanise an interval: 0 stays false, any nonzero value is true."""
    low, high = value
    if low == high:
        return (0, 0) if low == 0 else (1, 1)
    if low > 0 or high < 0:
        return 1, 1
    return UNKNOWN


class IntervalEvaluator:
    """Bounds of a term over all defined completions of a partial assignment."""

    def __init__(self, csp: GroundCsp) -> None:
        self.lo = [var.lo for var in csp.variables]
        self.hi = [var.hi for var in csp.variables]

    def bounds(self, term: Term, assignment: list[int | None]) -> Interval:
        if isinstance(term, Const):
            return term.value, term.value
        if isinstance(term, Var):
            value = assignment[term.index]
            return (self.lo[term.index], self.hi[term.index]) if value is None else (value, value)
        if isinstance(term, Linear):
            low = high = term.const
            for index, coeff in term.coeffs:
                value = assignment[index]
                if value is not None:
                    low += coeff * value
                    high += coeff * value
                elif coeff > 0:
                    low += coeff * self.lo[index]
                    high += coeff * self.hi[index]
                else:
                    low += coeff * self.hi[index]
                    high += coeff * self.lo[index]
            return _compare(term.op, (low, high), (0, 0))
        if term.op in ("guard_imp", "guard_and", "guard_mul"):
            return self._guarded(term, assignment)
        args = [self.bounds(arg, assignment) for arg in term.args]
        if any(arg is None for arg in args):
            return None
        return self._apply(term.op, args)  # type: ignore[arg-type]

    def _guarded(self, term: App, assignment: list[int | None]) -> Interval:
        guard = self.bounds(term.args[0], assignment)
        if guard is None:
            return None
        guard = _truth(guard)
        if guard == (0, 0):
            return (1, 1) if term.op == "guard_imp" else (0, 0)
        body = self.bounds(term.args[1], assignment)
        if guard == (1, 1):
            return body
        if term.op == "guard_imp":
            return (1, 1) if body is None else (_truth(body)[0], 1)
        if term.op == "guard_and":
            return (0, 0) if body is None else (0, _truth(body)[1])
        return (0, 0) if body is None else (min(0, body[0]), max(0, body[1]))

    def _apply(self, op: str, args: list[tuple[int, int]]) -> Interval:  # noqa: C901
        if op == "add":
            return sum(a[0] for a in args), sum(a[1] for a in args)
        if op == "neg":
            return -args[0][1], -args[0][0]
        if op == "not":
            low, high = _truth(args[0])
            return 1 - high, 1 - low
        if op == "and":
            truths = [_truth(a) for a in args]
            return min(t[0] for t in truths), min(t[1] for t in truths)
        if op == "or":
            truths = [_truth(a) for a in args]
            return max(t[0] for t in truths), max(t[1] for t in truths)
        if op == "imp":
            left, right = _truth(args[0]), _truth(args[1])
            return max(1 - left[1], right[0]), max(1 - left[0], right[1])
        if op == "iff":
            left, right = _truth(args[0]), _truth(args[1])
            if left[0] == left[1] and right[0] == right[1]:
                return (1, 1) if left == right else (0, 0)
            return UNKNOWN
        if op in ("+", "-", "*"):
            return _corners(op, args[0], args[1])
        if op == "/":
            return _divide(args[0], args[1])
        if op == "%":
            return _modulo(args[0], args[1])
        return _compare(op, args[0], args[1])

    def refuted(self, term: Term, assignment: list[int | None]) -> bool:
        """True when no completion of ``assignment`` satisfies ``term``."""
        value = self.bounds(term, assignment)
        return value is None or _truth(value) == (0, 0)


class BacktrackingSolver:
    """Depth-first search over a static order with interval pruning and branch and bound."""

    def __init__(self, csp: GroundCsp, budget: int = 100_000, mode: SolveMode = "first") -> None:
        if budget < 1:
            raise ValueError("budget must be at least 1")
        self.csp = csp
        self.budget = budget
        self.mode: SolveMode = mode if mode != "optimize" or csp.objective is not None else "first"
        self.intervals = IntervalEvaluator(csp)
        self.constraints = csp.all_constraints()
        self.watchers: list[list[Term]] = [[] for _ in csp.variables]
        for constraint in self.constraints:
            for index in variables_of(constraint):
                self.watchers[index].append(constraint)
        self.raw_solutions: list[tuple[int, ...]] = []
        self.best: int | None = None
        self.nodes = 0
        self.failures = 0

    def _bound_refutes(self, assignment: list[int | None]) -> bool:
        if self.mode != "optimize" or self.best is None:
            return False
        direction, term = self.csp.objective  # type: ignore[misc]
        value = self.intervals.bounds(term, assignment)
        if value is None:
            return True
        return value[0] >= self.best if direction == "minimising" else value[1] <= self.best

    def _consistent(self, index: int, assignment: list[int | None]) -> bool:
        if any(self.intervals.refuted(c, assignment) for c in self.watchers[index]):
            return False
        return not self._bound_refutes(assignment)

    def _record(self, assignment: list[int | None]) -> bool:
        """Store a complete assignment; returns True when the search should stop."""
        raw = tuple(assignment)  # type: ignore[arg-type]
        if self.mode == "optimize":
            _, term = self.csp.objective  # type: ignore[misc]
            value = self.intervals.bounds(term, assignment)
            if value is None:
                return False
            self.best = value[0]
            self.raw_solutions = [raw]  # type: ignore[list-item]
            LOG.debug("incumbent objective %d after %d nodes", self.best, self.nodes)
            return False
        self.raw_solutions.append(raw)  # type: ignore[arg-type]
        return self.mode == "first"

    def _search(self) -> bool:
        """Run the search; returns False when the node budget ran out."""
        variables = self.csp.variables
        count = len(variables)
        assignment: list[int | None] = [None] * count
        if any(self.intervals.refuted(c, assignment) for c in self.constraints):
            return True
        next_value = [var.lo for var in variables]
        depth = 0
        while depth >= 0:
            if depth == count:
                if self._record(assignment):
                    return True
                depth -= 1
                continue
            value = next_value[depth]
            if value > variables[depth].hi:
                assignment[depth] = None
                next_value[depth] = variables[depth].lo
                depth -= 1
                continue
            if self.nodes >= self.budget:
                return False
            next_value[depth] = value + 1
            self.nodes += 1
            assignment[depth] = value
            if not self._consistent(depth, assignment):
                self.failures += 1
                continue
            depth += 1
        return True

    def run(self) -> SolveResult:
        started = time.perf_counter()
        completed = self._search()
        millis = (time.perf_counter() - started) * 1000.0
        if not completed:
            status = "node-budget-exhausted"
        elif self.mode == "optimize":
            status = "optimal" if self.raw_solutions else "unsat"
        else:
            status = "sat" if self.raw_solutions else "unsat"
        LOG.debug("solve %s: %s with %d nodes, %d failures", self.mode, status, self.nodes, self.failures)
        return SolveResult(
            status=status,
            solutions=[self.csp.decode(raw) for raw in self.raw_solutions],
            objective=self.best,
            nodes=self.nodes,
            failures=self.failures,
            millis=millis,
        )


def solve(csp: GroundCsp, budget: int = 100_000, mode: SolveMode = "first") -> SolveResult:
    return BacktrackingSolver(csp, budget, mode).run()


def brute_force(csp: GroundCsp, *, limit: int = BRUTE_FORCE_LIMIT) -> set[tuple[int, ...]]:
    """Every complete assignment satisfying all constraints, by plain enumeration."""
    ranges = [range(var.lo, var.hi + 1) for var in csp.variables]
    total = math.prod(len(r) for r in ranges)
    if total > limit:
        raise BruteForceLimitError(f"{total} assignments exceed the brute force limit of {limit}")
    constraints = csp.all_constraints()
    return {values for values in product(*ranges) if all(holds(c, values) for c in constraints)}


def objective_value(csp: GroundCsp, raw: tuple[int, ...]) -> int | None:
    if csp.objective is None:
        return None
    try:
        return evaluate_term(csp.objective[1], raw)
    except UndefinedArithmetic:
        return None
