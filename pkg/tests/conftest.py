from __future__ import annotations

import random
from collections.abc import Callable
from pathlib import Path

import pytest


FIXTURES = Path(__file__).resolve().parent / "fixtures"

CORPUS_SIZE = 200
FOCUSED_CORPUS_SIZE = 60


class _SpecWriter:
    """Random well-typed specifications over small domains."""

    def __init__(self, rng: random.Random) -> None:
        self.rng = rng
        self.ints: list[str] = []
        self.bools: list[str] = []
        self.sets: list[str] = []
        self.binders: list[str] = []

    def int_expr(self, depth: int) -> str:
        rng = self.rng
        atoms = [str(rng.randint(0, 5)), *self.ints, *self.binders]
        if depth <= 0 or rng.random() < 0.3:
            return rng.choice(atoms)
        choice = rng.random()
        if choice < 0.55:
            op = rng.choice(["+", "-", "*", "+", "-", "/", "%"])
            right = str(rng.randint(1, 3)) if op in ("/", "%") and rng.random() < 0.8 else self.int_expr(depth - 1)
            return f"({self.int_expr(depth - 1)}){op}({right})"
        if choice < 0.65:
            return f"-({self.int_expr(depth - 1)})"
        if choice < 0.8:
            return f"toInt({self.bool_expr(depth - 1)})"
        if self.sets and choice < 0.9:
            return f"|{rng.choice(self.sets)}|"
        return rng.choice(atoms)

    def bool_expr(self, depth: int) -> str:
        rng = self.rng
        if depth <= 0 or rng.random() < 0.2:
            atoms = ["true", "false", *self.bools]
            if rng.random() < 0.7:
                op = rng.choice(["=", "!=", "<", "<=", ">", ">="])
                return f"{self.int_expr(0)} {op} {self.int_expr(0)}"
            return rng.choice(atoms)
        choice = rng.random()
        if choice < 0.35:
            op = rng.choice(["=", "!=", "<", "<=", ">", ">="])
            return f"({self.int_expr(depth - 1)}) {op} ({self.int_expr(depth - 1)})"
        if choice < 0.6:
            op = rng.choice(["/\\", "\\/", "->", "<->"])
            return f"({self.bool_expr(depth - 1)}) {op} ({self.bool_expr(depth - 1)})"
        if choice < 0.7:
            return f"!({self.bool_expr(depth - 1)})"
        if self.sets and choice < 0.8:
            return f"{rng.randint(1, 3)} in {rng.choice(self.sets)}"
        if choice < 0.9 and not self.binders:
            return self.quantified(depth)
        return self.bool_expr(depth - 1)

    def quantified(self, depth: int) -> str:
        rng = self.rng
        binder = "q"
        if self.sets and rng.random() < 0.5:
            head = f"{rng.choice(['forAll', 'exists'])} {binder} in {rng.choice(self.sets)}"
        else:
            head = f"{rng.choice(['forAll', 'exists'])} {binder} : int(1..{rng.randint(1, 3)})"
        self.binders.append(binder)
        try:
            op = rng.choice(["<", "<=", ">", ">=", "="])
            body = f"{self.int_expr(depth - 1)} {op} {self.int_expr(depth - 1)}"
        finally:
            self.binders.pop()
        return f"{head} . {body}"

    def spec(self) -> str:
        rng = self.rng
        lines: list[str] = []
        bound = "3"
        if rng.random() < 0.5:
            lines.append("given n : int(1..3)")
            bound = "n"
        for index in range(rng.randint(1, 3)):
            name = f"x{index}"
            hi = bound if index == 0 else str(rng.randint(1, 3))
            lines.append(f"find {name} : int(0..{hi})")
            self.ints.append(name)
        if rng.random() < 0.5:
            lines.append("find b : bool")
            self.bools.append("b")
        if rng.random() < 0.6:
            attrs = rng.choice(["", " (minSize 1)", " (maxSize 2)"])
            lines.append(f"find S : set{attrs} of int(1..3)")
            self.sets.append("S")
        constraints = [self.bool_expr(rng.randint(1, 3)) for _ in range(rng.randint(1, 3))]
        if self.sets and rng.random() < 0.4:
            constraints.append(f"|S| {rng.choice(['>=', '<=', '=', '>', '<'])} {rng.randint(0, 2)}")
        if self.sets and rng.random() < 0.3:
            constraints.append(f"{rng.randint(1, 3)} in S")
        if rng.random() < 0.3:
            constraints.append(f"forAll q : int(1..2) . q <= {rng.choice(self.ints)} + {rng.randint(0, 2)}")
        lines.append("such that")
        lines.append(",\n".join("    " + c for c in constraints))
        if rng.random() < 0.2:
            lines.append(f"{rng.choice(['minimising', 'maximising'])} {self.int_expr(1)}")
        return "\n".join(lines) + "\n"


def random_spec_text(seed: int) -> str:
    return _SpecWriter(random.Random(seed)).spec()


def rule_focused_spec_text(seed: int) -> str:
    """A random specification with at least one match for every rewrite rule."""
    rng = random.Random(seed)
    lines: list[str] = []
    hi = "3"
    if rng.random() < 0.5:
        lines.append("given n : int(1..3)")
        hi = "n"
    attrs = rng.choice(["", " (maxSize 2)"])
    lines += [f"find x0 : int(0..{hi})", "find y : int(0..3)", f"find S : set{attrs} of int(1..3)"]
    identity = rng.choice(["x0+0", "0+x0", "x0*1", "1*x0", "x0-0", "x0/1"])
    a, b, c = rng.randint(0, 2), rng.randint(0, 2), rng.randint(1, 2)
    op = rng.choice(["<=", "<", ">=", ">"])
    card_op = rng.choice(["<=", "<", ">=", ">"] + ([] if attrs else ["="]))
    constraints = [
        f"{identity} <= ({a}+{b})*{c}",
        f"forAll h in S . h {op} y + {rng.randint(0, 2)}",
        f"|S| {card_op} {rng.randint(1, 2)}",
        f"{rng.randint(1, 3)} in S",
    ]
    if rng.random() < 0.3:
        constraints.append("forAll p : int(1..2) . forAll h in S . h <= x0 + p")
    if rng.random() < 0.3:
        constraints.append("!(!(y != x0))")
    rng.shuffle(constraints)
    lines.append("such that")
    lines.append(",\n".join("    " + constraint for constraint in constraints))
    return "\n".join(lines) + "\n"


def random_instance(text: str, seed: int) -> dict[str, int]:
    return {"n": random.Random(seed).randint(1, 3)} if "given n" in text else {}


@pytest.fixture(scope="session")
def spec_corpus() -> list[tuple[int, str]]:
    return [(seed, random_spec_text(seed)) for seed in range(CORPUS_SIZE)]


@pytest.fixture
def fixture_text() -> Callable[[str], str]:
    def read(name: str) -> str:
        return (FIXTURES / name).read_text(encoding="utf-8")

    return read


@pytest.fixture(scope="session")
def rule_focused_corpus() -> list[tuple[int, str]]:
    return [(seed, rule_focused_spec_text(seed)) for seed in range(FOCUSED_CORPUS_SIZE)]
