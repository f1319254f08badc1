"""Constraint language: parser, AST, and load-time resolution.

Constraint files are UTF-8 text with ``--`` line comments and one block per
constraint::

    context Message inv nameMatch:
        self.receiver.ops->exists(o | o.name = self.name)

Grammar (EBNF)::

    file       := { constraint }
    constraint := "context" ID "inv" ID ":" expr
    expr       := or_expr [ "implies" expr ]            -- right associative
    or_expr    := and_expr { "or" and_expr }
    and_expr   := unary { "and" unary }
    unary      := "not" unary | relation
    relation   := operand [ relop operand ]
    relop      := "=" | "<>" | "<=" | ">=" | "<" | ">"
    operand    := INT | STRING | "true" | "false" | path
    path       := ("self" | ID) { "." ID } [ "->" collop ]
    collop     := "size" "(" ")" | "isEmpty" "(" ")" | "notEmpty" "(" ")"
               | "includes" "(" path ")"
               | ("exists" | "forAll") "(" ID "|" expr ")"

Navigating a reference yields the (ordered) collection of its targets. Using
``.`` or a comparison on a collection first collapses it: a single element
stands for itself, anything else is the undefined value. Comparisons and
collection operations on undefined evaluate to false.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from .core import Metamodel, Value


class ParseError(Exception):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class ResolutionError(Exception):
    """A parsed constraint names classes/attributes/references that do not exist."""


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Literal:
    value: Value


@dataclass(frozen=True)
class Path:
    """Navigation from a variable through attribute/reference steps."""

    base: str  # "self" or a quantifier variable
    steps: tuple[str, ...] = ()


@dataclass(frozen=True)
class Compare:
    op: str  # = <> < <= > >=
    lhs: "Expr"
    rhs: "Expr"


@dataclass(frozen=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True)
class BoolOp:
    op: str  # and | or | implies
    lhs: "Expr"
    rhs: "Expr"


@dataclass(frozen=True)
class Size:
    target: Path


@dataclass(frozen=True)
class EmptyCheck:
    target: Path
    negated: bool  # False = isEmpty, True = notEmpty


@dataclass(frozen=True)
class Includes:
    target: Path
    member: Path


@dataclass(frozen=True)
class Quantifier:
    kind: str  # exists | forAll
    target: Path
    var: str
    body: "Expr"


Expr = Union[Literal, Path, Compare, Not, BoolOp, Size, EmptyCheck, Includes, Quantifier]


@dataclass(frozen=True)
class Constraint:
    name: str
    context_class: str
    expr: Expr

    def pretty(self) -> str:
        return f"context {self.context_class} inv {self.name}: {pretty_expr(self.expr)}"


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>--[^\n]*)
  | (?P<int>\d+)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<arrow>->)
  | (?P<op><=|>=|<>|[=<>()|:])
  | (?P<dot>\.)
  | (?P<id>[A-Za-z_][A-Za-z_0-9]*)
    """,
    re.VERBOSE,
)

KEYWORDS = {"context", "inv", "and", "or", "not", "implies", "true", "false", "self"}
COLLOPS = {"size", "isEmpty", "notEmpty", "includes", "exists", "forAll"}


@dataclass(frozen=True)
class Token:
    kind: str  # int | string | id | arrow | op | dot | eof
    text: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup or ""
        raw = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, raw, line, col))
        newlines = raw.count("\n")
        if newlines:
            line += newlines
            col = len(raw) - raw.rfind("\n")
        else:
            col += len(raw)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parser (recursive descent)
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def cur(self) -> Token:
        return self.tokens[self.pos]

    def bump(self) -> Token:
        tok = self.cur
        self.pos += 1
        return tok

    def fail(self, message: str) -> ParseError:
        return ParseError(message, self.cur.line, self.cur.column)

    def expect(self, kind: str, text: str | None = None) -> Token:
        tok = self.cur
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text if text is not None else kind
            raise self.fail(f"expected {want!r}, found {tok.text or 'end of file'!r}")
        return self.bump()

    def at_word(self, word: str) -> bool:
        return self.cur.kind == "id" and self.cur.text == word

    def parse_file(self) -> list[Constraint]:
        out = []
        while self.cur.kind != "eof":
            out.append(self.parse_constraint())
        return out

    def parse_constraint(self) -> Constraint:
        if not self.at_word("context"):
            raise self.fail("expected 'context'")
        self.bump()
        ctx = self.expect("id").text
        if not self.at_word("inv"):
            raise self.fail("expected 'inv'")
        self.bump()
        name = self.expect("id").text
        self.expect("op", ":")
        expr = self.parse_expr()
        return Constraint(name=name, context_class=ctx, expr=expr)

    def parse_expr(self) -> Expr:
        lhs = self.parse_or()
        if self.at_word("implies"):
            self.bump()
            return BoolOp("implies", lhs, self.parse_expr())
        return lhs

    def parse_or(self) -> Expr:
        lhs = self.parse_and()
        while self.at_word("or"):
            self.bump()
            lhs = BoolOp("or", lhs, self.parse_and())
        return lhs

    def parse_and(self) -> Expr:
        lhs = self.parse_unary()
        while self.at_word("and"):
            self.bump()
            lhs = BoolOp("and", lhs, self.parse_unary())
        return lhs

    def parse_unary(self) -> Expr:
        if self.at_word("not"):
            self.bump()
            return Not(self.parse_unary())
        return self.parse_relation()

    def parse_relation(self) -> Expr:
        lhs = self.parse_operand()
        if self.cur.kind == "op" and self.cur.text in ("=", "<>", "<", "<=", ">", ">="):
            op = self.bump().text
            return Compare(op, lhs, self.parse_operand())
        return lhs

    def parse_operand(self) -> Expr:
        tok = self.cur
        if tok.kind == "op" and tok.text == "(":
            self.bump()
            inner = self.parse_expr()
            self.expect("op", ")")
            return inner
        if tok.kind == "int":
            self.bump()
            return Literal(int(tok.text))
        if tok.kind == "string":
            self.bump()
            body = tok.text[1:-1].replace('\\"', '"').replace("\\\\", "\\")
            return Literal(body)
        if tok.kind == "id" and tok.text in ("true", "false"):
            self.bump()
            return Literal(tok.text == "true")
        if tok.kind == "id":
            return self.parse_path()
        raise self.fail(f"expected an expression, found {tok.text or 'end of file'!r}")

    def parse_path(self) -> Expr:
        base = self.expect("id").text
        if base in KEYWORDS and base != "self":
            raise self.fail(f"unexpected keyword {base!r}")
        steps: list[str] = []
        while self.cur.kind == "dot":
            self.bump()
            steps.append(self.expect("id").text)
        path = Path(base, tuple(steps))
        if self.cur.kind == "arrow":
            self.bump()
            return self.parse_collop(path)
        return path

    def parse_collop(self, target: Path) -> Expr:
        op_tok = self.expect("id")
        op = op_tok.text
        if op not in COLLOPS:
            raise ParseError(f"unknown collection operation {op!r}", op_tok.line, op_tok.column)
        self.expect("op", "(")
        if op == "size":
            self.expect("op", ")")
            return Size(target)
        if op in ("isEmpty", "notEmpty"):
            self.expect("op", ")")
            return EmptyCheck(target, negated=(op == "notEmpty"))
        if op == "includes":
            member = self.parse_path()
            if not isinstance(member, Path):
                raise ParseError("includes() takes a navigation argument", op_tok.line, op_tok.column)
            self.expect("op", ")")
            return Includes(target, member)
        var = self.expect("id").text
        self.expect("op", "|")
        body = self.parse_expr()
        self.expect("op", ")")
        return Quantifier(op, target, var, body)


def parse_expression(text: str) -> Expr:
    parser = _Parser(tokenize(text))
    expr = parser.parse_expr()
    if parser.cur.kind != "eof":
        raise parser.fail(f"trailing input {parser.cur.text!r}")
    return expr


def parse_constraint_file(text: str, metamodel: Metamodel | None = None) -> list[Constraint]:
    """Parse constraints; with a metamodel, also resolve all names."""
    constraints = _Parser(tokenize(text)).parse_file()
    names: set[str] = set()
    for c in constraints:
        if c.name in names:
            raise ResolutionError(f"duplicate constraint name {c.name!r}")
        names.add(c.name)
    if metamodel is not None:
        for c in constraints:
            resolve_constraint(c, metamodel)
    return constraints


# ---------------------------------------------------------------------------
# Load-time name resolution / shape checking
# ---------------------------------------------------------------------------


def _resolve_path(path: Path, env: dict[str, str], mm: Metamodel, cname: str) -> tuple[str, str] | None:
    """Walk the path; returns (kind, detail) of the result.

    kind is "entities" (detail = class reached) or "value" (detail = attr type).
    """
    if path.base not in env:
        raise ResolutionError(f"constraint {cname!r}: unknown variable {path.base!r}")
    cls = env[path.base]
    for i, step in enumerate(path.steps):
        cd = mm.class_def(cls)
        if step in cd.attributes:
            if i != len(path.steps) - 1:
                raise ResolutionError(
                    f"constraint {cname!r}: cannot navigate past attribute {step!r} of class {cls!r}"
                )
            return ("value", cd.attributes[step])
        if step in cd.references:
            cls = cd.references[step].target
            continue
        raise ResolutionError(f"constraint {cname!r}: class {cls!r} has no feature {step!r}")
    return ("entities", cls)


def _resolve_expr(expr: Expr, env: dict[str, str], mm: Metamodel, cname: str) -> None:
    if isinstance(expr, Literal):
        return
    if isinstance(expr, Path):
        _resolve_path(expr, env, mm, cname)
        return
    if isinstance(expr, Compare):
        _resolve_expr(expr.lhs, env, mm, cname)
        _resolve_expr(expr.rhs, env, mm, cname)
        return
    if isinstance(expr, Not):
        _resolve_expr(expr.operand, env, mm, cname)
        return
    if isinstance(expr, BoolOp):
        _resolve_expr(expr.lhs, env, mm, cname)
        _resolve_expr(expr.rhs, env, mm, cname)
        return
    if isinstance(expr, (Size, EmptyCheck)):
        _resolve_path(expr.target, env, mm, cname)
        return
    if isinstance(expr, Includes):
        _resolve_path(expr.target, env, mm, cname)
        _resolve_path(expr.member, env, mm, cname)
        return
    if isinstance(expr, Quantifier):
        kind, detail = _resolve_path(expr.target, env, mm, cname) or ("entities", "")
        if kind != "entities":
            raise ResolutionError(f"constraint {cname!r}: quantifier over a non-collection navigation")
        if expr.var in env:
            raise ResolutionError(f"constraint {cname!r}: variable {expr.var!r} shadows an outer binding")
        inner = dict(env)
        inner[expr.var] = detail
        _resolve_expr(expr.body, inner, mm, cname)
        return
    raise ResolutionError(f"constraint {cname!r}: unknown AST node {expr!r}")


def resolve_constraint(constraint: Constraint, mm: Metamodel) -> None:
    if not mm.has_class(constraint.context_class):
        raise ResolutionError(
            f"constraint {constraint.name!r}: unknown context class {constraint.context_class!r}"
        )
    _resolve_expr(constraint.expr, {"self": constraint.context_class}, mm, constraint.name)


# ---------------------------------------------------------------------------
# Pretty printer (round-trips through the parser)
# ---------------------------------------------------------------------------


def _pretty_value(v: Value) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    return str(v)


def _pretty_path(p: Path) -> str:
    return ".".join((p.base,) + p.steps)


# Precedence levels; "implies" is right-associative, "or"/"and" left-associative.
_PRECEDENCE = {"implies": 1, "or": 2, "and": 3}
_NOT_PREC = 4
_CMP_PREC = 5
_ATOM_PREC = 10


def pretty_expr(expr: Expr, min_prec: int = 0) -> str:
    if isinstance(expr, Literal):
        return _pretty_value(expr.value)
    if isinstance(expr, Path):
        return _pretty_path(expr)
    if isinstance(expr, Size):
        return f"{_pretty_path(expr.target)}->size()"
    if isinstance(expr, EmptyCheck):
        return f"{_pretty_path(expr.target)}->{'notEmpty' if expr.negated else 'isEmpty'}()"
    if isinstance(expr, Includes):
        return f"{_pretty_path(expr.target)}->includes({_pretty_path(expr.member)})"
    if isinstance(expr, Quantifier):
        return f"{_pretty_path(expr.target)}->{expr.kind}({expr.var} | {pretty_expr(expr.body)})"
    if isinstance(expr, Compare):
        text = f"{pretty_expr(expr.lhs, _CMP_PREC + 1)} {expr.op} {pretty_expr(expr.rhs, _CMP_PREC + 1)}"
        return f"({text})" if _CMP_PREC < min_prec else text
    if isinstance(expr, Not):
        text = f"not {pretty_expr(expr.operand, _NOT_PREC)}"
        return f"({text})" if _NOT_PREC < min_prec else text
    if isinstance(expr, BoolOp):
        prec = _PRECEDENCE[expr.op]
        if expr.op == "implies":
            text = f"{pretty_expr(expr.lhs, prec + 1)} {expr.op} {pretty_expr(expr.rhs, prec)}"
        else:
            text = f"{pretty_expr(expr.lhs, prec)} {expr.op} {pretty_expr(expr.rhs, prec + 1)}"
        return f"({text})" if prec < min_prec else text
    raise ValueError(f"unknown AST node {expr!r}")
