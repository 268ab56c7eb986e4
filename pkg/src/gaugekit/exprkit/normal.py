"""Canonical rational form and exact differentiation.

Every expression is read as a rational function whose variables ("kernels")
are the coordinate symbols and the function applications sin/cos/exp/log/sqrt
with canonical arguments. The canonical form is numerator/denominator with the
polynomial gcd cancelled and the denominator scaled to coprime integer
coefficients with a positive leading coefficient.

Kernel rewrite rules: constant folding at the usual special values,
log(exp(u)) -> u, and sqrt(u)^2 -> u. Nothing else: relations between kernels
such as sin^2 + cos^2 = 1 are deliberately left alone.
"""
from __future__ import annotations

import threading
from fractions import Fraction
from functools import lru_cache
from math import isqrt

from . import poly as P
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
    postorder,
)
from .printer import to_text

Rat = tuple  # (numerator Poly, denominator Poly)


class _Undefined(ArithmeticError):
    """Division by the zero rational function."""


# key -> (kernel Expr, argument Rat or None); append-only cache
_KERNELS: dict[tuple, tuple[Expr, Rat | None]] = {}
_LOCK = threading.Lock()


def _register(key: tuple, kernel: Expr, arg: Rat | None) -> tuple:
    if key not in _KERNELS:
        with _LOCK:
            _KERNELS.setdefault(key, (kernel, arg))
    return key


def sym_key(name: str) -> tuple:
    return _register((0, name, ""), Sym(name), None)


def _const_rat(c) -> Rat:
    return (P.const(c), P.const(1))


R_ZERO: Rat = ({}, P.const(1))
R_ONE: Rat = _const_rat(1)


def _is_sqrt_key(k) -> bool:
    return k[0] == 1 and k[1] == "sqrt"


def _canon(n: P.Poly, d: P.Poly) -> Rat:
    if not d:
        raise _Undefined
    if not n:
        return R_ZERO
    if not P.is_const(d):
        g = P.gcd(n, d)
        if not P.is_const(g):
            n = P.div_exact(n, g)
            d = P.div_exact(d, g)
    d2 = P.integer_content_normal(d)
    _, l1 = P.leading(d)
    _, l2 = P.leading(d2)
    if l1 != l2:
        n = P.scale(n, l2 / l1)
    return _reduce_sqrt(n, d2)


def _reduce_sqrt(n: P.Poly, d: P.Poly) -> Rat:
    def needs(p):
        return any(_is_sqrt_key(k) and e >= 2 for m in p for k, e in m)

    if not (needs(n) or needs(d)):
        return (n, d)
    return rdiv(_sqrt_poly(n), _sqrt_poly(d))


def _sqrt_poly(p: P.Poly) -> Rat:
    acc = R_ZERO
    for m, c in p.items():
        keep = []
        factor = _const_rat(c)
        for k, e in m:
            if _is_sqrt_key(k) and e >= 2:
                arg = _KERNELS[k][1]
                factor = rmul(factor, rpow(arg, e // 2))
                if e % 2:
                    keep.append((k, 1))
            else:
                keep.append((k, e))
        factor = rmul(factor, ({tuple(keep): Fraction(1)}, P.const(1)))
        acc = radd(acc, factor)
    return acc


def radd(a: Rat, b: Rat) -> Rat:
    n1, d1 = a
    n2, d2 = b
    if not n1:
        return b
    if not n2:
        return a
    if d1 == d2:
        return _canon(P.add(n1, n2), d1)
    if P.is_const(d1) and P.is_const(d2):
        return _canon(P.add(P.mul(n1, d2), P.mul(n2, d1)), P.mul(d1, d2))
    g = P.gcd(d1, d2)
    if P.is_const(g):
        return _canon(P.add(P.mul(n1, d2), P.mul(n2, d1)), P.mul(d1, d2))
    e1 = P.div_exact(d1, g)
    e2 = P.div_exact(d2, g)
    return _canon(P.add(P.mul(n1, e2), P.mul(n2, e1)), P.mul(P.mul(e1, e2), g))


def rneg(a: Rat) -> Rat:
    return (P.neg(a[0]), a[1])


def rsub(a: Rat, b: Rat) -> Rat:
    return radd(a, rneg(b))


def rmul(a: Rat, b: Rat) -> Rat:
    n1, d1 = a
    n2, d2 = b
    if not n1 or not n2:
        return R_ZERO
    if P.is_const(d1) and P.is_const(d2):
        return _canon(P.mul(n1, n2), P.mul(d1, d2))
    return _canon(P.mul(n1, n2), P.mul(d1, d2))


def rinv(a: Rat) -> Rat:
    n, d = a
    if not n:
        raise _Undefined
    return _canon(d, n)


def rdiv(a: Rat, b: Rat) -> Rat:
    return rmul(a, rinv(b))


def rpow(a: Rat, k: int) -> Rat:
    if k < 0:
        a = rinv(a)
        k = -k
    n, d = a
    return _canon(P.pow_(n, k), P.pow_(d, k))


# ---------------------------------------------------------------- kernels

def _perfect_square(v: Fraction) -> Fraction | None:
    if v < 0:
        return None
    a, b = v.numerator, v.denominator
    ra, rb = isqrt(a), isqrt(b)
    if ra * ra == a and rb * rb == b:
        return Fraction(ra, rb)
    return None


def _func_rat(name: str, arg: Rat) -> Rat:
    n, d = arg
    if P.is_const(n) and P.is_const(d):
        v = P.const_value(n) / P.const_value(d)
        if v == 0 and name in ("sin", "sqrt"):
            return R_ZERO
        if v == 0 and name in ("cos", "exp"):
            return R_ONE
        if v == 1 and name == "log":
            return R_ZERO
        if name == "sqrt":
            r = _perfect_square(v)
            if r is not None:
                return _const_rat(r)
    if name == "log" and P.is_const(d) and P.const_value(d) == 1 and len(n) == 1:
        (m, c), = n.items()
        if c == 1 and len(m) == 1 and m[0][1] == 1 and m[0][0][0] == 1 and m[0][0][1] == "exp":
            inner = _KERNELS[m[0][0]][0]
            return to_rational(inner.arg)
    arg_expr = from_rational(arg)
    kernel = Func(name, arg_expr)
    key = _register((1, name, to_text(arg_expr)), kernel, arg)
    return ({((key, 1),): Fraction(1)}, P.const(1))


# ---------------------------------------------------------------- conversion

@lru_cache(maxsize=1 << 16)
def to_rational(e: Expr) -> Rat:
    memo: dict[int, Rat] = {}
    for node in postorder(e):
        memo[id(node)] = _node_rat(node, memo)
    return memo[id(e)]


def _node_rat(node: Expr, memo) -> Rat:
    if isinstance(node, Const):
        return _const_rat(node.value)
    if isinstance(node, Sym):
        return (P.var(sym_key(node.name)), P.const(1))
    if isinstance(node, Neg):
        return rneg(memo[id(node.arg)])
    if isinstance(node, Add):
        return radd(memo[id(node.left)], memo[id(node.right)])
    if isinstance(node, Mul):
        return rmul(memo[id(node.left)], memo[id(node.right)])
    if isinstance(node, Div):
        return rdiv(memo[id(node.left)], memo[id(node.right)])
    if isinstance(node, Pow):
        return rpow(memo[id(node.base)], node.exp)
    if isinstance(node, Func):
        return _func_rat(node.name, memo[id(node.arg)])
    raise TypeError(f"unknown node {type(node).__name__}")


def _term_expr(m, c: Fraction) -> Expr:
    out: Expr | None = None if c == 1 else Const(c)
    for k, e in m:
        base = _KERNELS[k][0]
        f = base if e == 1 else Pow(base, e)
        out = f if out is None else Mul(out, f)
    return out if out is not None else Const(c)


def poly_expr(p: P.Poly) -> Expr:
    if not p:
        return ZERO
    out: Expr | None = None
    for m, c in P.sorted_terms(p):
        if out is None:
            out = _term_expr(m, c) if (c > 0 or not m) else Neg(_term_expr(m, -c))
        elif c > 0:
            out = Add(out, _term_expr(m, c))
        else:
            out = Add(out, Neg(_term_expr(m, -c)))
    return out


def from_rational(r: Rat) -> Expr:
    n, d = r
    if P.is_const(d) and P.const_value(d) == 1:
        return poly_expr(n)
    return Div(poly_expr(n), poly_expr(d))


@lru_cache(maxsize=1 << 16)
def normalize(e: Expr) -> Expr:
    """Canonical form; idempotent."""
    try:
        return from_rational(to_rational(e))
    except _Undefined:
        if isinstance(e, Div):
            return Div(normalize(e.left), ZERO)
        return Div(ONE, ZERO)


def is_normal_zero(e: Expr) -> bool:
    try:
        return not to_rational(e)[0]
    except _Undefined:
        return False


# ---------------------------------------------------------------- derivatives

def _kernel_derivative(key, x) -> Rat:
    if key[0] == 0:
        return R_ONE if key == x else R_ZERO
    kernel, arg = _KERNELS[key]
    du = rat_diff(arg, x)
    if not du[0]:
        return R_ZERO
    name = kernel.name
    if name == "sin":
        outer = _func_rat("cos", arg)
    elif name == "cos":
        outer = rneg(_func_rat("sin", arg))
    elif name == "exp":
        outer = ({((key, 1),): Fraction(1)}, P.const(1))
    elif name == "log":
        outer = rinv(arg)
    else:  # sqrt
        outer = rinv(({((key, 1),): Fraction(2)}, P.const(1)))
    return rmul(outer, du)


def _poly_diff(p: P.Poly, x) -> Rat:
    # group the formal partials by kernel, then apply the chain rule once per kernel
    partials: dict = {}
    for m, c in p.items():
        for i, (k, e) in enumerate(m):
            rest = m[:i] + (((k, e - 1),) if e > 1 else ()) + m[i + 1:]
            bucket = partials.setdefault(k, {})
            v = bucket.get(rest, 0) + c * e
            if v:
                bucket[rest] = v
            else:
                bucket.pop(rest, None)
    acc = R_ZERO
    for k, part in partials.items():
        if not part:
            continue
        dk = _kernel_derivative(k, x)
        if dk[0]:
            acc = radd(acc, rmul((part, P.const(1)), dk))
    return acc


def rat_diff(r: Rat, x) -> Rat:
    n, d = r
    dn = _poly_diff(n, x)
    if P.is_const(d):
        return rmul(dn, (P.const(1), d))
    dd = _poly_diff(d, x)
    # (n/d)' = n'/d - n d'/d^2
    return rsub(rdiv(dn, (d, P.const(1))), rdiv(rmul((n, P.const(1)), dd), (P.mul(d, d), P.const(1))))


@lru_cache(maxsize=1 << 16)
def diff(e: Expr, coord: str) -> Expr:
    """Exact partial derivative, normalized."""
    if isinstance(coord, Sym):
        coord = coord.name
    return from_rational(rat_diff(to_rational(e), sym_key(coord)))
