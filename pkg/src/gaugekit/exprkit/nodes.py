"""Immutable expression tree.

Nodes are hash-consed by value only (no global table): equality is structural
and hashes are computed once at construction so that large shared DAGs stay
cheap to compare and to use as dictionary keys.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Iterator, Union

FUNCS = ("sin", "cos", "exp", "log", "sqrt")

Number = Union[int, Fraction]


class Expr:
    __slots__ = ("_hash",)

    def children(self) -> tuple["Expr", ...]:
        return ()

    def _key(self) -> tuple:
        raise NotImplementedError

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, Expr):
            return NotImplemented
        # iterative so that long left-leaning sums do not hit the recursion limit
        stack = [(self, other)]
        while stack:
            a, b = stack.pop()
            if a is b:
                continue
            if type(a) is not type(b) or a._hash != b._hash or a._key() != b._key():
                return False
            stack.extend(zip(a.children(), b.children()))
        return True

    def __ne__(self, other: object) -> bool:
        r = self.__eq__(other)
        return r if r is NotImplemented else not r

    # arithmetic builds lightly simplified trees; normalize() gives the canonical form
    def __add__(self, other: "ExprLike") -> "Expr":
        return add(self, as_expr(other))

    def __radd__(self, other: "ExprLike") -> "Expr":
        return add(as_expr(other), self)

    def __sub__(self, other: "ExprLike") -> "Expr":
        return add(self, neg(as_expr(other)))

    def __rsub__(self, other: "ExprLike") -> "Expr":
        return add(as_expr(other), neg(self))

    def __mul__(self, other: "ExprLike") -> "Expr":
        return mul(self, as_expr(other))

    def __rmul__(self, other: "ExprLike") -> "Expr":
        return mul(as_expr(other), self)

    def __truediv__(self, other: "ExprLike") -> "Expr":
        return div(self, as_expr(other))

    def __rtruediv__(self, other: "ExprLike") -> "Expr":
        return div(as_expr(other), self)

    def __pow__(self, n: int) -> "Expr":
        if not isinstance(n, int):
            raise TypeError("only integer exponents are supported")
        return power(self, n)

    def __neg__(self) -> "Expr":
        return neg(self)

    def __str__(self) -> str:
        from .printer import to_text

        return to_text(self)

    def __repr__(self) -> str:
        return f"Expr({self})"


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: Number):
        v = Fraction(value)
        object.__setattr__(self, "value", v)
        object.__setattr__(self, "_hash", hash(("c", v)))

    def _key(self) -> tuple:
        return (self.value,)

    def __setattr__(self, name, value):
        raise AttributeError("Expr nodes are immutable")


class Sym(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "_hash", hash(("s", name)))

    def _key(self) -> tuple:
        return (self.name,)

    def __setattr__(self, name, value):
        raise AttributeError("Expr nodes are immutable")


class _Unary(Expr):
    __slots__ = ("arg",)
    tag = "?"

    def __init__(self, arg: Expr):
        object.__setattr__(self, "arg", arg)
        object.__setattr__(self, "_hash", hash((self.tag, arg._hash)))

    def children(self) -> tuple[Expr, ...]:
        return (self.arg,)

    def _key(self) -> tuple:
        return ()

    def __setattr__(self, name, value):
        raise AttributeError("Expr nodes are immutable")


class Neg(_Unary):
    __slots__ = ()
    tag = "neg"


class Func(Expr):
    __slots__ = ("name", "arg")

    def __init__(self, name: str, arg: Expr):
        if name not in FUNCS:
            raise ValueError(f"unknown function {name!r}")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "arg", arg)
        object.__setattr__(self, "_hash", hash(("f", name, arg._hash)))

    def children(self) -> tuple[Expr, ...]:
        return (self.arg,)

    def _key(self) -> tuple:
        return (self.name,)

    def __setattr__(self, name, value):
        raise AttributeError("Expr nodes are immutable")


class _Binary(Expr):
    __slots__ = ("left", "right")
    tag = "?"

    def __init__(self, left: Expr, right: Expr):
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        object.__setattr__(self, "_hash", hash((self.tag, left._hash, right._hash)))

    def children(self) -> tuple[Expr, ...]:
        return (self.left, self.right)

    def _key(self) -> tuple:
        return ()

    def __setattr__(self, name, value):
        raise AttributeError("Expr nodes are immutable")


class Add(_Binary):
    __slots__ = ()
    tag = "add"


class Mul(_Binary):
    __slots__ = ()
    tag = "mul"


class Div(_Binary):
    __slots__ = ()
    tag = "div"


class Pow(Expr):
    __slots__ = ("base", "exp")

    def __init__(self, base: Expr, exp: int):
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "exp", int(exp))
        object.__setattr__(self, "_hash", hash(("pow", base._hash, int(exp))))

    def children(self) -> tuple[Expr, ...]:
        return (self.base,)

    def _key(self) -> tuple:
        return (self.exp,)

    def __setattr__(self, name, value):
        raise AttributeError("Expr nodes are immutable")


ExprLike = Union[Expr, int, Fraction]

ZERO = Const(0)
ONE = Const(1)


def as_expr(x: ExprLike) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, bool):
        raise TypeError("bool is not an expression")
    if isinstance(x, (int, Fraction)):
        return Const(x)
    if isinstance(x, str):
        from .parser import parse

        return parse(x, normalize=False)
    raise TypeError(f"cannot convert {type(x).__name__} to Expr")


def is_const(e: Expr, value: Number | None = None) -> bool:
    if not isinstance(e, Const):
        return False
    return value is None or e.value == value


# Light constructors: fold constants and drop neutral elements, nothing more.

def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if is_const(a, 0):
        return b
    if is_const(b, 0):
        return a
    return Add(a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def sub(a: Expr, b: Expr) -> Expr:
    return add(a, neg(b))


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if is_const(a, 0) or is_const(b, 0):
        return ZERO
    if is_const(a, 1):
        return b
    if is_const(b, 1):
        return a
    if is_const(a, -1):
        return neg(b)
    if is_const(b, -1):
        return neg(a)
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if isinstance(b, Const) and b.value != 0:
        if isinstance(a, Const):
            return Const(a.value / b.value)
        if b.value == 1:
            return a
    if is_const(a, 0) and not is_const(b, 0):
        return ZERO
    return Div(a, b)


def power(a: Expr, n: int) -> Expr:
    if n == 0:
        return ONE
    if n == 1:
        return a
    if isinstance(a, Const) and (a.value != 0 or n > 0):
        return Const(a.value ** n)
    return Pow(a, n)


def func(name: str, a: Expr) -> Expr:
    return Func(name, a)


def sin(a: ExprLike) -> Expr:
    return Func("sin", as_expr(a))


def cos(a: ExprLike) -> Expr:
    return Func("cos", as_expr(a))


def exp(a: ExprLike) -> Expr:
    return Func("exp", as_expr(a))


def log(a: ExprLike) -> Expr:
    return Func("log", as_expr(a))


def sqrt(a: ExprLike) -> Expr:
    return Func("sqrt", as_expr(a))


def total(items) -> Expr:
    """Sum of an iterable of expressions (light simplification only)."""
    acc: Expr = ZERO
    for it in items:
        acc = add(acc, as_expr(it))
    return acc


def postorder(*roots: Expr) -> Iterator[Expr]:
    """Unique nodes of the DAG, children before parents, without recursion."""
    seen: set[int] = set()
    stack: list[tuple[Expr, bool]] = [(r, False) for r in reversed(roots)]
    while stack:
        node, expanded = stack.pop()
        nid = id(node)
        if expanded:
            yield node
            continue
        if nid in seen:
            continue
        seen.add(nid)
        stack.append((node, True))
        for c in reversed(node.children()):
            if id(c) not in seen:
                stack.append((c, False))


def free_symbols(e: Expr) -> frozenset[str]:
    return frozenset(n.name for n in postorder(e) if isinstance(n, Sym))


def node_count(e: Expr) -> int:
    return sum(1 for _ in postorder(e))
