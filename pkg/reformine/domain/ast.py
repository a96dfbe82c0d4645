"""Typed syntax tree for Emini specifications.

Every node exposes the same tree view used by the printer, the graph encoder and
the rewrite engine: ``token`` and ``kind`` give the two halves of a vertex label,
``children()`` lists child nodes in ordinal order and ``with_children()`` rebuilds
the node from a new child tuple. Declared names (decision variables, parameters,
lettings and quantifier binders) appear as ``Declarator`` children so that the
tree shape matches the annotated dump, e.g. ``find -> x -> int -> 0, 100``.

Nodes are frozen; source positions are carried for diagnostics only and never
take part in equality.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Iterator, Literal, Union


Position = tuple[int, int] | None

REF_DECISION = "ReferenceToDecisionVariable"
REF_PARAMETER = "ReferenceToParameter"
REF_LETTING = "ReferenceToLetting"
REF_BINDER = "ReferenceToQuantifiedVariable"
REF_KINDS = (REF_DECISION, REF_PARAMETER, REF_LETTING, REF_BINDER)

UNARY_OPS = ("-", "!", "toInt", "|")
ARITHMETIC_OPS = ("+", "-", "*", "/", "%")
COMPARISON_OPS = ("=", "!=", "<", "<=", ">", ">=")
SET_OPS = ("in", "subsetEq")
LOGIC_OPS = ("/\\", "\\/", "->", "<->")
BINARY_OPS = ARITHMETIC_OPS + COMPARISON_OPS + SET_OPS + LOGIC_OPS
COMMUTATIVE_OPS = ("+", "*", "=", "!=", "/\\", "\\/")
QUANTIFIERS = ("forAll", "exists", "sum")
ATTRIBUTE_ORDER = ("size", "minSize", "maxSize")

Direction = Literal["minimising", "maximising"]


@dataclass(frozen=True, slots=True)
class IntLit:
    value: int

    kind = "Integer"

    @property
    def token(self) -> str:
        return str(self.value)

    def children(self) -> tuple["Node", ...]:
        return ()

    def with_children(self, children: tuple["Node", ...]) -> "IntLit":
        return self


@dataclass(frozen=True, slots=True)
class BoolLit:
    value: bool

    kind = "Boolean"

    @property
    def token(self) -> str:
        return "true" if self.value else "false"

    def children(self) -> tuple["Node", ...]:
        return ()

    def with_children(self, children: tuple["Node", ...]) -> "BoolLit":
        return self


@dataclass(frozen=True, slots=True)
class Ref:
    name: str
    ref_kind: str = ""
    pos: Position = field(default=None, compare=False, repr=False)

    @property
    def kind(self) -> str:
        return self.ref_kind or REF_DECISION

    @property
    def token(self) -> str:
        return self.name

    def children(self) -> tuple["Node", ...]:
        return ()

    def with_children(self, children: tuple["Node", ...]) -> "Ref":
        return self


@dataclass(frozen=True, slots=True)
class Unary:
    op: str
    operand: "Expr"

    kind = "UnaryExpression"

    @property
    def token(self) -> str:
        return self.op

    def children(self) -> tuple["Node", ...]:
        return (self.operand,)

    def with_children(self, children: tuple["Node", ...]) -> "Unary":
        return Unary(self.op, children[0])  # type: ignore[arg-type]


@dataclass(frozen=True, slots=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"

    kind = "BinaryExpression"

    @property
    def token(self) -> str:
        return self.op

    def children(self) -> tuple["Node", ...]:
        return (self.left, self.right)

    def with_children(self, children: tuple["Node", ...]) -> "Binary":
        return Binary(self.op, children[0], children[1])  # type: ignore[arg-type]


@dataclass(frozen=True, slots=True)
class TupleLit:
    items: tuple["Expr", ...]

    kind = "TupleLiteral"
    token = "tuple"

    def children(self) -> tuple["Node", ...]:
        return self.items

    def with_children(self, children: tuple["Node", ...]) -> "TupleLit":
        return TupleLit(tuple(children))  # type: ignore[arg-type]


@dataclass(frozen=True, slots=True)
class RelationLit:
    """Constant relation; arity 0 marks the empty literal ``{}``."""

    arity: int
    tuples: tuple[tuple[int, ...], ...]

    kind = "RelationLiteral"
    token = "relation"

    def children(self) -> tuple["Node", ...]:
        if self.arity == 1:
            return tuple(IntLit(row[0]) for row in self.tuples)
        return tuple(TupleLit(tuple(IntLit(v) for v in row)) for row in self.tuples)

    def with_children(self, children: tuple["Node", ...]) -> "RelationLit":
        rows: list[tuple[int, ...]] = []
        for child in children:
            if isinstance(child, IntLit):
                rows.append((child.value,))
            elif isinstance(child, TupleLit):
                rows.append(tuple(item.value for item in child.items))  # type: ignore[union-attr]
            else:
                raise TypeError(f"relation literal element must be constant, got {child.kind}")
        return relation_literal(rows)


@dataclass(frozen=True, slots=True)
class Declarator:
    """A declared name; ``body`` is the domain or value hanging under it."""

    name: str
    role: str
    body: "Domain | Expr | None" = None

    @property
    def kind(self) -> str:
        return self.role

    @property
    def token(self) -> str:
        return self.name

    def children(self) -> tuple["Node", ...]:
        return () if self.body is None else (self.body,)

    def with_children(self, children: tuple["Node", ...]) -> "Declarator":
        return Declarator(self.name, self.role, children[0] if children else None)


@dataclass(frozen=True, slots=True)
class Quantifier:
    quant: str
    binder: str
    range: "Domain | Expr"
    body: "Expr"
    pos: Position = field(default=None, compare=False, repr=False)

    kind = "Quantifier"

    @property
    def token(self) -> str:
        return self.quant

    def children(self) -> tuple["Node", ...]:
        return (Declarator(self.binder, "QuantifiedVariable"), self.range, self.body)

    def with_children(self, children: tuple["Node", ...]) -> "Quantifier":
        binder = children[0]
        name = binder.name if isinstance(binder, Declarator) else self.binder
        return Quantifier(self.quant, name, children[1], children[2], self.pos)  # type: ignore[arg-type]


@dataclass(frozen=True, slots=True)
class BoolDomain:
    kind = "BoolDomain"
    token = "bool"

    def children(self) -> tuple["Node", ...]:
        return ()

    def with_children(self, children: tuple["Node", ...]) -> "BoolDomain":
        return self


@dataclass(frozen=True, slots=True)
class IntDomain:
    lo: "Expr"
    hi: "Expr | None"

    kind = "IntDomain"
    token = "int"

    def children(self) -> tuple["Node", ...]:
        return (self.lo,) if self.hi is None else (self.lo, self.hi)

    def with_children(self, children: tuple["Node", ...]) -> "IntDomain":
        return IntDomain(children[0], children[1] if len(children) > 1 else None)  # type: ignore[arg-type]


@dataclass(frozen=True, slots=True)
class Attribute:
    name: str
    value: "Expr"

    kind = "DomainAttribute"

    @property
    def token(self) -> str:
        return self.name

    def children(self) -> tuple["Node", ...]:
        return (self.value,)

    def with_children(self, children: tuple["Node", ...]) -> "Attribute":
        return Attribute(self.name, children[0])  # type: ignore[arg-type]


@dataclass(frozen=True, slots=True)
class RelationDomain:
    components: tuple["Domain", ...]
    attrs: tuple[Attribute, ...] = ()
    is_set: bool = False

    @property
    def kind(self) -> str:
        return "SetDomain" if self.is_set else "RelationDomain"

    @property
    def token(self) -> str:
        return "set" if self.is_set else "relation"

    @property
    def arity(self) -> int:
        return len(self.components)

    def attr(self, name: str) -> "Expr | None":
        for attribute in self.attrs:
            if attribute.name == name:
                return attribute.value
        return None

    def with_attr(self, name: str, value: "Expr | None") -> "RelationDomain":
        kept = [a for a in self.attrs if a.name != name]
        if value is not None:
            kept.append(Attribute(name, value))
        return RelationDomain(self.components, sort_attributes(kept), self.is_set)

    def children(self) -> tuple["Node", ...]:
        return (*self.attrs, *self.components)

    def with_children(self, children: tuple["Node", ...]) -> "RelationDomain":
        attrs = [c for c in children if isinstance(c, Attribute)]
        components = tuple(c for c in children if not isinstance(c, Attribute))
        return RelationDomain(components, sort_attributes(attrs), self.is_set)  # type: ignore[arg-type]


@dataclass(frozen=True, slots=True)
class DomainRef:
    name: str
    pos: Position = field(default=None, compare=False, repr=False)

    kind = "ReferenceToDomain"

    @property
    def token(self) -> str:
        return self.name

    def children(self) -> tuple["Node", ...]:
        return ()

    def with_children(self, children: tuple["Node", ...]) -> "DomainRef":
        return self


@dataclass(frozen=True, slots=True)
class GivenStmt:
    names: tuple[str, ...]
    domain: "Domain"
    pos: Position = field(default=None, compare=False, repr=False)

    kind = "GivenStatement"
    token = "given"

    def children(self) -> tuple["Node", ...]:
        return (*(Declarator(name, "Parameter") for name in self.names), self.domain)

    def with_children(self, children: tuple["Node", ...]) -> "GivenStmt":
        names = tuple(c.name for c in children[:-1] if isinstance(c, Declarator))
        return GivenStmt(names, children[-1], self.pos)  # type: ignore[arg-type]


@dataclass(frozen=True, slots=True)
class LettingStmt:
    name: str
    value: "Expr | Domain"
    pos: Position = field(default=None, compare=False, repr=False)

    kind = "LettingStatement"
    token = "letting"

    def children(self) -> tuple["Node", ...]:
        return (Declarator(self.name, "LettingVariable", self.value),)

    def with_children(self, children: tuple["Node", ...]) -> "LettingStmt":
        declarator = children[0]
        assert isinstance(declarator, Declarator) and declarator.body is not None
        return LettingStmt(declarator.name, declarator.body, self.pos)


@dataclass(frozen=True, slots=True)
class WhereStmt:
    expr: "Expr"
    pos: Position = field(default=None, compare=False, repr=False)

    kind = "WhereStatement"
    token = "where"

    def children(self) -> tuple["Node", ...]:
        return (self.expr,)

    def with_children(self, children: tuple["Node", ...]) -> "WhereStmt":
        return WhereStmt(children[0], self.pos)  # type: ignore[arg-type]


@dataclass(frozen=True, slots=True)
class FindStmt:
    name: str
    domain: "Domain"
    pos: Position = field(default=None, compare=False, repr=False)

    kind = "FindStatement"
    token = "find"

    def children(self) -> tuple["Node", ...]:
        return (Declarator(self.name, "DecisionVariable", self.domain),)

    def with_children(self, children: tuple["Node", ...]) -> "FindStmt":
        declarator = children[0]
        assert isinstance(declarator, Declarator) and declarator.body is not None
        return FindStmt(declarator.name, declarator.body, self.pos)  # type: ignore[arg-type]


@dataclass(frozen=True, slots=True)
class SuchThatStmt:
    exprs: tuple["Expr", ...]
    pos: Position = field(default=None, compare=False, repr=False)

    kind = "SuchThatStatement"
    token = "such that"

    def children(self) -> tuple["Node", ...]:
        return self.exprs

    def with_children(self, children: tuple["Node", ...]) -> "SuchThatStmt":
        return SuchThatStmt(tuple(children), self.pos)  # type: ignore[arg-type]


@dataclass(frozen=True, slots=True)
class ObjectiveStmt:
    direction: Direction
    expr: "Expr"
    pos: Position = field(default=None, compare=False, repr=False)

    kind = "ObjectiveStatement"

    @property
    def token(self) -> str:
        return self.direction

    def children(self) -> tuple["Node", ...]:
        return (self.expr,)

    def with_children(self, children: tuple["Node", ...]) -> "ObjectiveStmt":
        return ObjectiveStmt(self.direction, children[0], self.pos)  # type: ignore[arg-type]


@dataclass(frozen=True, slots=True)
class SpecAst:
    statements: tuple["Statement", ...] = ()

    kind = "Node"
    token = "root"

    def children(self) -> tuple["Node", ...]:
        return self.statements

    def with_children(self, children: tuple["Node", ...]) -> "SpecAst":
        return SpecAst(tuple(children))  # type: ignore[arg-type]

    def finds(self) -> list[FindStmt]:
        return [s for s in self.statements if isinstance(s, FindStmt)]

    def givens(self) -> list[GivenStmt]:
        return [s for s in self.statements if isinstance(s, GivenStmt)]

    def find(self, name: str) -> FindStmt | None:
        for statement in self.finds():
            if statement.name == name:
                return statement
        return None

    def objective(self) -> ObjectiveStmt | None:
        for statement in self.statements:
            if isinstance(statement, ObjectiveStmt):
                return statement
        return None

    def constraints(self) -> list["Expr"]:
        out: list[Expr] = []
        for statement in self.statements:
            if isinstance(statement, SuchThatStmt):
                out.extend(statement.exprs)
        return out


Expr = Union[IntLit, BoolLit, Ref, Unary, Binary, TupleLit, RelationLit, Quantifier]
Domain = Union[BoolDomain, IntDomain, RelationDomain, DomainRef]
Statement = Union[GivenStmt, LettingStmt, WhereStmt, FindStmt, SuchThatStmt, ObjectiveStmt]
Node = Union[Expr, Domain, Statement, Attribute, Declarator, SpecAst]

EXPR_TYPES = (IntLit, BoolLit, Ref, Unary, Binary, TupleLit, RelationLit, Quantifier)
DOMAIN_TYPES = (BoolDomain, IntDomain, RelationDomain, DomainRef)
LITERAL_TYPES = (IntLit, BoolLit)


def sort_attributes(attrs: list[Attribute] | tuple[Attribute, ...]) -> tuple[Attribute, ...]:
    return tuple(sorted(attrs, key=lambda a: ATTRIBUTE_ORDER.index(a.name)))


def relation_literal(rows: list[tuple[int, ...]] | set[tuple[int, ...]]) -> RelationLit:
    ordered = tuple(sorted(set(rows)))
    return RelationLit(len(ordered[0]) if ordered else 0, ordered)


def is_literal(node: object) -> bool:
    return isinstance(node, LITERAL_TYPES)


Path = tuple[int, ...]


def walk(root: Node, path: Path = ()) -> Iterator[tuple[Path, Node]]:
    """Pre-order traversal yielding 1-based child-ordinal paths."""
    yield path, root
    for ordinal, child in enumerate(root.children(), start=1):
        yield from walk(child, (*path, ordinal))


def node_at(root: Node, path: Path) -> Node:
    node = root
    for ordinal in path:
        children = node.children()
        if ordinal < 1 or ordinal > len(children):
            raise LookupError(f"path {list(path)} does not address a node")
        node = children[ordinal - 1]
    return node


def replace_at(root: Node, path: Path, replacement: Node) -> Node:
    if not path:
        return replacement
    children = list(root.children())
    ordinal = path[0]
    if ordinal < 1 or ordinal > len(children):
        raise LookupError(f"path {list(path)} does not address a node")
    children[ordinal - 1] = replace_at(children[ordinal - 1], path[1:], replacement)
    return root.with_children(tuple(children))


def transform(node: Node, fn: Callable[[Node], Node]) -> Node:
    """Bottom-up rebuild: ``fn`` receives each node after its children were rebuilt."""
    children = node.children()
    if children:
        rebuilt = tuple(transform(child, fn) for child in children)
        if any(new is not old for new, old in zip(rebuilt, children)):
            node = node.with_children(rebuilt)
    return fn(node)


def count_nodes(root: Node) -> int:
    return sum(1 for _ in walk(root))
