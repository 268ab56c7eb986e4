"""Numeric evaluation: scalar with error reporting, and vectorized over points."""
from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np

from .nodes import Add, Const, Div, Expr, Func, Mul, Neg, Pow, Sym, postorder


class EvaluationError(ArithmeticError):
    def __init__(self, message: str, subexpression: Expr):
        super().__init__(f"{message} in {subexpression}")
        self.subexpression = subexpression


_SCALAR_FUNCS = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
}


def evaluate(e: Expr, point: Mapping[str, float]) -> float:
    """Value of `e` at `point`; any non-finite intermediate raises EvaluationError."""
    memo: dict[int, float] = {}
    for node in postorder(e):
        try:
            v = _scalar(node, point, memo)
        except (ZeroDivisionError, ValueError, OverflowError) as exc:
            raise EvaluationError(type(exc).__name__ if not str(exc) else str(exc), node) from None
        if not math.isfinite(v):
            raise EvaluationError("non-finite value", node)
        memo[id(node)] = v
    return memo[id(e)]


def _scalar(node: Expr, point, memo) -> float:
    if isinstance(node, Const):
        return float(node.value)
    if isinstance(node, Sym):
        try:
            return float(point[node.name])
        except KeyError:
            raise ValueError(f"no value for coordinate {node.name!r}") from None
    if isinstance(node, Neg):
        return -memo[id(node.arg)]
    if isinstance(node, Add):
        return memo[id(node.left)] + memo[id(node.right)]
    if isinstance(node, Mul):
        return memo[id(node.left)] * memo[id(node.right)]
    if isinstance(node, Div):
        return memo[id(node.left)] / memo[id(node.right)]
    if isinstance(node, Pow):
        return memo[id(node.base)] ** node.exp
    if isinstance(node, Func):
        return _SCALAR_FUNCS[node.name](memo[id(node.arg)])
    raise TypeError(f"unknown node {type(node).__name__}")


_VEC_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "log": np.log, "sqrt": np.sqrt}


def evaluate_many(exprs: Sequence[Expr], coords: Sequence[str], points: np.ndarray) -> np.ndarray:
    """Evaluate every expression at every point.

    Returns an array of shape (len(exprs), len(points)); entries where any
    intermediate value was non-finite are NaN. Shared subexpressions across
    the whole batch are evaluated once.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    m = points.shape[0]
    env = {c: points[:, i] for i, c in enumerate(coords)}
    vals: dict[int, np.ndarray] = {}
    bad: dict[int, np.ndarray | bool] = {}
    with np.errstate(all="ignore"):
        for node in postorder(*exprs):
            v, b = _vector(node, env, vals, bad)
            fin = np.isfinite(v)
            if not np.all(fin):
                b = b | ~fin
            vals[id(node)] = v
            bad[id(node)] = b
    out = np.empty((len(exprs), m))
    for i, e in enumerate(exprs):
        row = np.broadcast_to(vals[id(e)], (m,)).astype(float, copy=True)
        b = bad[id(e)]
        if b is not False:
            row[np.broadcast_to(b, (m,))] = np.nan
        out[i] = row
    return out


def _vector(node: Expr, env, vals, bad):
    if isinstance(node, Const):
        return np.float64(node.value), False
    if isinstance(node, Sym):
        try:
            return env[node.name], False
        except KeyError:
            raise ValueError(f"no value for coordinate {node.name!r}") from None
    kids = node.children()
    b = False
    for c in kids:
        cb = bad[id(c)]
        if cb is not False:
            b = cb if b is False else (b | cb)
    if isinstance(node, Neg):
        return -vals[id(node.arg)], b
    if isinstance(node, Add):
        return vals[id(node.left)] + vals[id(node.right)], b
    if isinstance(node, Mul):
        return vals[id(node.left)] * vals[id(node.right)], b
    if isinstance(node, Div):
        return vals[id(node.left)] / vals[id(node.right)], b
    if isinstance(node, Pow):
        base = vals[id(node.base)]
        if node.exp < 0:
            return 1.0 / base ** (-node.exp), b
        return base ** node.exp, b
    if isinstance(node, Func):
        return _VEC_FUNCS[node.name](vals[id(node.arg)]), b
    raise TypeError(f"unknown node {type(node).__name__}")
