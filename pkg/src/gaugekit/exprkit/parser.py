"""Recursive-descent parser for the expression grammar.

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := base ('^' integer)?
    base   := number | symbol | func '(' expr ')' | '(' expr ')' | '-' base
"""
from __future__ import annotations

import re
from fractions import Fraction
from typing import Iterable

from .nodes import FUNCS, Add, Const, Div, Expr, Func, Mul, Neg, Pow, Sym

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*|\.\d+|\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^()]))"
)


class ParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class UnknownSymbolError(ParseError):
    pass


class _Tokens:
    def __init__(self, source: str):
        self.items: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(source):
            if source[pos:].strip() == "":
                break
            m = _TOKEN.match(source, pos)
            if m is None or m.end() == pos:
                at = pos + (len(source[pos:]) - len(source[pos:].lstrip()))
                raise ParseError(f"unexpected character {source[at]!r}", at)
            kind = m.lastgroup
            self.items.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()
        self.end = len(source)
        self.i = 0

    def peek(self) -> tuple[str, str, int] | None:
        return self.items[self.i] if self.i < len(self.items) else None

    def take(self) -> tuple[str, str, int]:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input", self.end)
        self.i += 1
        return tok

    def at_op(self, *ops: str) -> bool:
        tok = self.peek()
        return tok is not None and tok[0] == "op" and tok[1] in ops

    def expect(self, op: str) -> None:
        tok = self.peek()
        if tok is None:
            raise ParseError(f"expected {op!r}", self.end)
        if tok[0] != "op" or tok[1] != op:
            raise ParseError(f"expected {op!r}", tok[2])
        self.i += 1


class _Parser:
    def __init__(self, source: str, names: frozenset[str] | None):
        self.toks = _Tokens(source)
        self.names = names

    def expr(self) -> Expr:
        node = self.term()
        while self.toks.at_op("+", "-"):
            op = self.toks.take()[1]
            rhs = self.term()
            node = Add(node, rhs if op == "+" else Neg(rhs))
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.toks.at_op("*", "/"):
            op = self.toks.take()[1]
            rhs = self.factor()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def factor(self) -> Expr:
        node = self.base()
        if self.toks.at_op("^"):
            self.toks.take()
            sign = 1
            if self.toks.at_op("-"):
                self.toks.take()
                sign = -1
            kind, text, pos = self.toks.take()
            if kind != "num" or not text.isdigit():
                raise ParseError("exponent must be an integer literal", pos)
            node = Pow(node, sign * int(text))
        return node

    def base(self) -> Expr:
        tok = self.toks.peek()
        if tok is None:
            raise ParseError("unexpected end of input", self.toks.end)
        kind, text, pos = tok
        if kind == "num":
            self.toks.take()
            return Const(Fraction(text))
        if kind == "name":
            self.toks.take()
            if text in FUNCS:
                self.toks.expect("(")
                inner = self.expr()
                self.toks.expect(")")
                return Func(text, inner)
            if self.names is not None and text not in self.names:
                raise UnknownSymbolError(f"unknown symbol {text!r}", pos)
            return Sym(text)
        if text == "(":
            self.toks.take()
            inner = self.expr()
            self.toks.expect(")")
            return inner
        if text == "-":
            self.toks.take()
            return Neg(self.base())
        raise ParseError(f"unexpected {text!r}", pos)


def _names(chart) -> frozenset[str] | None:
    if chart is None:
        return None
    coords = getattr(chart, "coords", chart)
    return frozenset(coords)


def parse(source: str, chart=None, normalize: bool = True) -> Expr:
    """Parse `source`; symbols must belong to `chart` (a Chart or iterable of names).

    The result is normalized unless `normalize=False`, in which case the raw
    syntax tree is returned.
    """
    if not isinstance(source, str) or not source.strip():
        raise ParseError("empty expression", 0)
    p = _Parser(source, _names(chart))
    tree = p.expr()
    leftover = p.toks.peek()
    if leftover is not None:
        raise ParseError(f"unexpected {leftover[1]!r}", leftover[2])
    if normalize:
        from .normal import normalize as _normalize

        return _normalize(tree)
    return tree


def parse_many(sources: Iterable[str], chart=None) -> list[Expr]:
    return [parse(s, chart) for s in sources]
