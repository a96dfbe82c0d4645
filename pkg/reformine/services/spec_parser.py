from __future__ import annotations

from lark import Lark, Token, Transformer, v_args
from lark.exceptions import UnexpectedCharacters, UnexpectedEOF, UnexpectedInput, UnexpectedToken, VisitError
from lark.tree import Meta

from reformine.domain.ast import (
    Attribute,
    Binary,
    BoolDomain,
    BoolLit,
    Domain,
    DomainRef,
    Expr,
    FindStmt,
    GivenStmt,
    IntDomain,
    IntLit,
    LettingStmt,
    ObjectiveStmt,
    Quantifier,
    Ref,
    RelationDomain,
    RelationLit,
    SpecAst,
    SuchThatStmt,
    TupleLit,
    Unary,
    WhereStmt,
    relation_literal,
    sort_attributes,
)
from reformine.domain.errors import ReformineError
from reformine.services.spec_checker import SpecCheckError, SpecCheckService


EMINI_GRAMMAR = r"""
    start: _statement*

    _statement: given_stmt
              | letting_stmt
              | where_stmt
              | find_stmt
              | such_that_stmt
              | objective_stmt

    given_stmt: "given" name_list ":" domain
    letting_stmt: "letting" NAME "be" "domain" domain  -> letting_domain
                | "letting" NAME "be" expr             -> letting_expr
    where_stmt: "where" expr ("," expr)*
    find_stmt: "find" find_decl ("," find_decl)*
    find_decl: name_list ":" domain
    such_that_stmt: "such" "that" expr ("," expr)*
    objective_stmt: MINIMISING expr | MAXIMISING expr
    name_list: NAME ("," NAME)*

    ?domain: "bool"                                                -> bool_domain
           | "int" "(" expr ".." [expr] ")"                        -> int_domain
           | "set" [attributes] "of" domain                        -> set_domain
           | "relation" [attributes] "of" "(" domain ("*" domain)* ")" -> relation_domain
           | NAME                                                  -> domain_ref
    attributes: "(" attribute ("," attribute)* ")"
    attribute: (SIZE | MINSIZE | MAXSIZE) expr

    ?expr: quantifier | iff
    quantifier: (FORALL | EXISTS | SUM) binders "." expr
    binders: NAME ("," NAME)* ":" domain     -> binders_domain
           | NAME ("," NAME)* "in" in_range  -> binders_in
    ?in_range: NAME -> ref
             | relation_lit

    ?iff: imp | iff _iff_op imp                -> binary
    ?imp: disj | disj _imp_op imp              -> binary
    ?disj: conj | disj _or_op conj             -> binary
    ?conj: cmp | conj _and_op cmp              -> binary
    ?cmp: arith | arith _cmp_op arith          -> binary
    ?arith: term | arith _add_op term          -> binary
    ?term: unary | term _mul_op unary          -> binary
    ?unary: atom
          | "-" unary                          -> neg
          | "!" unary                          -> not_
    ?atom: INT                                 -> int_lit
         | "true"                              -> true_lit
         | "false"                             -> false_lit
         | NAME                                -> ref
         | "(" expr ")"
         | "(" expr ("," expr)+ ")"            -> tuple_lit
         | "toInt" "(" expr ")"                -> to_int
         | "|" expr "|"                        -> card
         | relation_lit

    relation_lit: ["relation" | "set"] "{" [rel_item ("," rel_item)*] "}"
    rel_item: signed_int
            | "(" signed_int ("," signed_int)* ")"
    signed_int: MINUS? INT

    !_iff_op: "<->"
    !_imp_op: "->"
    !_or_op: "\\/"
    !_and_op: "/\\"
    !_cmp_op: "=" | "!=" | "<" | "<=" | ">" | ">=" | "in" | "subsetEq"
    !_add_op: "+" | "-"
    !_mul_op: "*" | "/" | "%"

    MINUS: "-"
    MINIMISING: "minimising"
    MAXIMISING: "maximising"
    FORALL: "forAll"
    EXISTS: "exists"
    SUM: "sum"
    SIZE: "size"
    MINSIZE: "minSize"
    MAXSIZE: "maxSize"
    NAME: /[A-Za-z_][A-Za-z0-9_]*/
    INT: /[0-9]+/
    COMMENT: /\$[^\n]*/

    %import common.WS
    %ignore WS
    %ignore COMMENT
"""


class SpecSyntaxError(ReformineError):
    """Raised when specification text does not match the Emini grammar."""


def _pos(meta_or_token: object) -> tuple[int, int] | None:
    line = getattr(meta_or_token, "line", None)
    column = getattr(meta_or_token, "column", None)
    if line is None or column is None:
        return None
    return (line, column)


class _DuplicateBinder(Exception):
    def __init__(self, name: str, token: Token) -> None:
        super().__init__(name)
        self.name = name
        self.token = token


@v_args(inline=True)
class SpecTransformer(Transformer):
    """Builds the frozen AST; multi-name sugar is expanded here."""

    @v_args(inline=False)
    def start(self, items: list) -> SpecAst:
        statements: list = []
        for item in items:
            if isinstance(item, list):
                statements.extend(item)
            else:
                statements.append(item)
        return SpecAst(tuple(statements))

    @v_args(inline=False)
    def name_list(self, tokens: list[Token]) -> list[Token]:
        return tokens

    @v_args(meta=True, inline=False)
    def given_stmt(self, meta: Meta, items: list) -> GivenStmt:
        names, domain = items
        return GivenStmt(tuple(str(t) for t in names), domain, _pos(meta))

    @v_args(meta=True, inline=False)
    def letting_domain(self, meta: Meta, items: list) -> LettingStmt:
        name, domain = items
        return LettingStmt(str(name), domain, _pos(meta))

    @v_args(meta=True, inline=False)
    def letting_expr(self, meta: Meta, items: list) -> LettingStmt:
        name, value = items
        return LettingStmt(str(name), value, _pos(meta))

    @v_args(meta=True, inline=False)
    def where_stmt(self, meta: Meta, items: list) -> list[WhereStmt]:
        return [WhereStmt(expr, _pos(meta)) for expr in items]

    @v_args(meta=True, inline=False)
    def find_stmt(self, meta: Meta, decls: list) -> list[FindStmt]:
        out: list[FindStmt] = []
        for names, domain in decls:
            for token in names:
                out.append(FindStmt(str(token), domain, _pos(token)))
        return out

    @v_args(inline=False)
    def find_decl(self, items: list) -> tuple:
        return (items[0], items[1])

    @v_args(meta=True, inline=False)
    def such_that_stmt(self, meta: Meta, items: list) -> SuchThatStmt:
        return SuchThatStmt(tuple(items), _pos(meta))

    @v_args(meta=True, inline=False)
    def objective_stmt(self, meta: Meta, items: list) -> ObjectiveStmt:
        direction, expr = items
        return ObjectiveStmt(str(direction), expr, _pos(meta))  # type: ignore[arg-type]

    def bool_domain(self) -> BoolDomain:
        return BoolDomain()

    def int_domain(self, lo: Expr, hi: Expr | None) -> IntDomain:
        return IntDomain(lo, hi)

    def set_domain(self, attrs: list[Attribute] | None, inner: Domain) -> RelationDomain:
        return RelationDomain((inner,), sort_attributes(attrs or []), is_set=True)

    @v_args(inline=False)
    def relation_domain(self, items: list) -> RelationDomain:
        attrs, *components = items
        return RelationDomain(tuple(components), sort_attributes(attrs or []), is_set=False)

    def domain_ref(self, token: Token) -> DomainRef:
        return DomainRef(str(token), _pos(token))

    @v_args(inline=False)
    def attributes(self, items: list[Attribute]) -> list[Attribute]:
        return items

    def attribute(self, name: Token, value: Expr) -> Attribute:
        return Attribute(str(name), value)

    @v_args(meta=True, inline=False)
    def quantifier(self, meta: Meta, items: list) -> Quantifier:
        quant, (names, range_), body = items
        seen: set[str] = set()
        for token in names:
            if str(token) in seen:
                raise _DuplicateBinder(str(token), token)
            seen.add(str(token))
        result = body
        for token in reversed(names):
            result = Quantifier(str(quant), str(token), range_, result, _pos(token))
        return result

    @v_args(inline=False)
    def binders_domain(self, items: list) -> tuple:
        return (items[:-1], items[-1])

    @v_args(inline=False)
    def binders_in(self, items: list) -> tuple:
        return (items[:-1], items[-1])

    def binary(self, left: Expr, op: Token, right: Expr) -> Binary:
        return Binary(str(op), left, right)

    def neg(self, operand: Expr) -> IntLit | Unary:
        if isinstance(operand, IntLit):
            return IntLit(-operand.value)
        return Unary("-", operand)

    def not_(self, operand: Expr) -> Unary:
        return Unary("!", operand)

    def to_int(self, operand: Expr) -> Unary:
        return Unary("toInt", operand)

    def card(self, operand: Expr) -> Unary:
        return Unary("|", operand)

    def int_lit(self, token: Token) -> IntLit:
        return IntLit(int(token))

    def true_lit(self) -> BoolLit:
        return BoolLit(True)

    def false_lit(self) -> BoolLit:
        return BoolLit(False)

    def ref(self, token: Token) -> Ref:
        return Ref(str(token), "", _pos(token))

    @v_args(inline=False)
    def tuple_lit(self, items: list) -> TupleLit:
        return TupleLit(tuple(items))

    @v_args(inline=False)
    def relation_lit(self, items: list) -> RelationLit:
        rows = [row for row in items if row is not None]
        arities = {len(row) for row in rows}
        if len(arities) > 1:
            raise ValueError("relation literal mixes tuple arities")
        return relation_literal(rows)

    @v_args(inline=False)
    def rel_item(self, values: list[int]) -> tuple[int, ...]:
        return tuple(values)

    @v_args(inline=False)
    def signed_int(self, tokens: list[Token]) -> int:
        value = int(tokens[-1])
        return -value if len(tokens) == 2 else value


_PARSER = Lark(
    EMINI_GRAMMAR,
    parser="lalr",
    propagate_positions=True,
    maybe_placeholders=True,
)


def _last_token_text(text: str) -> str:
    stripped = text.rstrip()
    return stripped[-1] if stripped else ""


def _end_position(text: str) -> tuple[int, int]:
    stripped = text.rstrip()
    lines = stripped.split("\n") if stripped else [""]
    return len(lines), len(lines[-1]) + 1


def _syntax_error(exc: UnexpectedInput, text: str, source: str | None) -> SpecSyntaxError:
    line = getattr(exc, "line", -1)
    column = getattr(exc, "column", -1)
    if isinstance(exc, UnexpectedToken) and exc.token.type == "$END" or isinstance(exc, UnexpectedEOF):
        line, column = _end_position(text)
        message = f"unexpected end of input after {_last_token_text(text)!r}"
    elif isinstance(exc, UnexpectedToken):
        message = f"unexpected token {str(exc.token)!r}"
    elif isinstance(exc, UnexpectedCharacters):
        message = f"unexpected character {exc.char!r}"
    else:
        message = "invalid syntax"
    if line is None or line < 1:
        line, column = _end_position(text)
    return SpecSyntaxError(message, source=source, line=line, column=column)


def parse_tree(text: str, source: str | None = None) -> SpecAst:
    """Parse without resolution or type checking (reference kinds left empty)."""
    try:
        tree = _PARSER.parse(text)
    except UnexpectedInput as exc:
        raise _syntax_error(exc, text, source) from exc
    try:
        return SpecTransformer().transform(tree)
    except VisitError as exc:
        original = exc.orig_exc
        if isinstance(original, _DuplicateBinder):
            raise SpecCheckError.single(
                "DUPLICATE_BINDER",
                f"binder '{original.name}' appears twice in one quantifier",
                source=source,
                position=_pos(original.token),
            ) from exc
        raise SpecSyntaxError(str(original), source=source) from exc


def parse_spec(text: str, source: str | None = None) -> SpecAst:
    """Parse, resolve and type-check specification text."""
    ast = parse_tree(text, source)
    return SpecCheckService().resolve(ast, source=source)
