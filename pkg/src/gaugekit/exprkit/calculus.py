"""Tree-level differentiation without normalization.

Used where intermediate results are only ever evaluated numerically (large
curvature tables); `diff` in normal.py is the exact, canonical variant.
"""
from __future__ import annotations

from .nodes import (
    ONE,
    ZERO,
    Add,
    Const,
    Div,
    Expr,
    Func,
    Mul,
    Neg,
    Pow,
    Sym,
    add,
    cos,
    div,
    mul,
    neg,
    postorder,
    power,
    sin,
    sub,
)


def tree_diff(e: Expr, coord: str) -> Expr:
    memo: dict[int, Expr] = {}
    for node in postorder(e):
        memo[id(node)] = _rule(node, coord, memo)
    return memo[id(e)]


def _rule(node: Expr, x: str, memo) -> Expr:
    if isinstance(node, Const):
        return ZERO
    if isinstance(node, Sym):
        return ONE if node.name == x else ZERO
    d = lambda c: memo[id(c)]  # noqa: E731
    if isinstance(node, Neg):
        return neg(d(node.arg))
    if isinstance(node, Add):
        return add(d(node.left), d(node.right))
    if isinstance(node, Mul):
        a, b = node.left, node.right
        return add(mul(d(a), b), mul(a, d(b)))
    if isinstance(node, Div):
        a, b = node.left, node.right
        da, db = d(a), d(b)
        if da == ZERO and db == ZERO:
            return ZERO
        return div(sub(mul(da, b), mul(a, db)), power(b, 2))
    if isinstance(node, Pow):
        db = d(node.base)
        if db == ZERO:
            return ZERO
        return mul(mul(Const(node.exp), power(node.base, node.exp - 1)), db)
    if isinstance(node, Func):
        du = d(node.arg)
        if du == ZERO:
            return ZERO
        u = node.arg
        if node.name == "sin":
            outer = cos(u)
        elif node.name == "cos":
            outer = neg(sin(u))
        elif node.name == "exp":
            outer = node
        elif node.name == "log":
            return div(du, u)
        else:
            return div(du, mul(Const(2), node))
        return mul(outer, du)
    raise TypeError(f"unknown node {type(node).__name__}")
