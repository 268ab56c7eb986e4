"""Text rendering in the input grammar; output always re-parses to an equal value."""
from __future__ import annotations

from .nodes import Add, Const, Div, Expr, Func, Mul, Neg, Pow, Sym

_SUM, _TERM, _UNARY, _POW, _ATOM = 1, 2, 3, 4, 5


def _const_prec(c: Const) -> int:
    v = c.value
    if v.denominator != 1:
        return _TERM
    return _ATOM if v >= 0 else _UNARY


def _prec(e: Expr) -> int:
    if isinstance(e, Const):
        return _const_prec(e)
    if isinstance(e, (Sym, Func)):
        return _ATOM
    if isinstance(e, Neg):
        return _UNARY
    if isinstance(e, Pow):
        return _POW if e.exp >= 0 else _TERM
    if isinstance(e, (Mul, Div)):
        return _TERM
    return _SUM


def _wrap(e: Expr, ok: bool) -> str:
    s = to_text(e)
    return s if ok else f"({s})"


def _const_text(v) -> str:
    if v.denominator == 1:
        return str(v.numerator)
    return f"{v.numerator}/{v.denominator}"


def to_text(e: Expr) -> str:
    if isinstance(e, Const):
        return _const_text(e.value)
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Func):
        return f"{e.name}({to_text(e.arg)})"
    if isinstance(e, Neg):
        p = _prec(e.arg)
        return "-" + _wrap(e.arg, p in (_UNARY, _ATOM))
    if isinstance(e, Pow):
        base = _wrap(e.base, _prec(e.base) == _ATOM)
        if e.exp >= 0:
            return f"{base}^{e.exp}"
        return f"1/{base}^{-e.exp}"
    if isinstance(e, Add):
        spine = []
        node: Expr = e
        while isinstance(node, Add):
            spine.append(node.right)
            node = node.left
        parts = [to_text(node)]
        for r in reversed(spine):
            if isinstance(r, Neg):
                parts.append(" - " + _wrap(r.arg, _prec(r.arg) >= _TERM))
            else:
                parts.append(" + " + _wrap(r, _prec(r) >= _TERM))
        return "".join(parts)
    if isinstance(e, (Mul, Div)):
        spine = []
        node = e
        while isinstance(node, (Mul, Div)):
            spine.append(("*" if isinstance(node, Mul) else "/", node.right))
            node = node.left
        parts = [_wrap(node, _prec(node) >= _TERM)]
        for op, r in reversed(spine):
            parts.append(op + _wrap(r, _prec(r) > _TERM))
        return "".join(parts)
    raise TypeError(f"unknown node {type(e).__name__}")
