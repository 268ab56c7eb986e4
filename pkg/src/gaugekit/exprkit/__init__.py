"""Symbolic scalar expressions in chart coordinates."""
from .calculus import tree_diff
from .evaluate import EvaluationError, evaluate, evaluate_many
from .nodes import (
    FUNCS,
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
    as_expr,
    cos,
    exp,
    free_symbols,
    log,
    sin,
    sqrt,
    total,
)
from .normal import diff, is_normal_zero, normalize
from .parser import ParseError, UnknownSymbolError, parse
from .printer import to_text
from .zerotest import ZeroVerdict, is_zero

__all__ = [
    "FUNCS", "ONE", "ZERO", "Add", "Const", "Div", "Expr", "Func", "Mul", "Neg", "Pow", "Sym",
    "EvaluationError", "ParseError", "UnknownSymbolError", "ZeroVerdict",
    "as_expr", "cos", "diff", "evaluate", "evaluate_many", "exp", "free_symbols", "is_normal_zero",
    "is_zero", "log", "normalize", "parse", "sin", "sqrt", "to_text", "total", "tree_diff",
]
