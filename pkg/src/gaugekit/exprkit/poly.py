"""Sparse multivariate polynomials over Q with exact gcd.

A polynomial is a dict mapping monomials to nonzero Fraction coefficients. A
monomial is a tuple of (variable, exponent) pairs sorted by variable; the
variables are opaque sortable keys supplied by the caller.

The gcd is the classical recursive one: strip contents, then run a primitive
pseudo-remainder sequence in a main variable.
"""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import gcd as igcd
from math import lcm as ilcm

Mono = tuple
Poly = dict

ONE_MONO: Mono = ()


def const(c) -> Poly:
    c = Fraction(c)
    return {ONE_MONO: c} if c else {}


def var(v) -> Poly:
    return {((v, 1),): Fraction(1)}


def is_const(p: Poly) -> bool:
    return not p or (len(p) == 1 and ONE_MONO in p)


def const_value(p: Poly) -> Fraction:
    return p.get(ONE_MONO, Fraction(0))


@lru_cache(maxsize=1 << 17)
def mono_mul(a: Mono, b: Mono) -> Mono:
    if not a:
        return b
    if not b:
        return a
    d = dict(a)
    for k, e in b:
        d[k] = d.get(k, 0) + e
    return tuple(sorted(d.items()))


def mono_div(a: Mono, b: Mono) -> Mono | None:
    """a / b if b divides a, else None."""
    d = dict(a)
    for k, e in b:
        have = d.get(k, 0)
        if have < e:
            return None
        if have == e:
            del d[k]
        else:
            d[k] = have - e
    return tuple(sorted(d.items()))


def mono_degree(m: Mono) -> int:
    return sum(e for _, e in m)


@lru_cache(maxsize=1 << 17)
def mono_order_key(m: Mono) -> tuple:
    """Sort key placing larger monomials (graded lex) first."""
    return (-mono_degree(m),) + tuple((0, k, -e) for k, e in m) + ((1,),)


def leading(p: Poly) -> tuple[Mono, Fraction]:
    m = min(p, key=mono_order_key)
    return m, p[m]


def sorted_terms(p: Poly) -> list[tuple[Mono, Fraction]]:
    return sorted(p.items(), key=lambda t: mono_order_key(t[0]))


def add(a: Poly, b: Poly) -> Poly:
    if len(a) < len(b):
        a, b = b, a
    r = dict(a)
    for m, c in b.items():
        v = r.get(m)
        if v is None:
            r[m] = c
        else:
            v += c
            if v:
                r[m] = v
            else:
                del r[m]
    return r


def scale(p: Poly, c) -> Poly:
    if not c:
        return {}
    c = Fraction(c)
    if c == 1:
        return p
    return {m: v * c for m, v in p.items()}


def neg(p: Poly) -> Poly:
    return {m: -v for m, v in p.items()}


def sub(a: Poly, b: Poly) -> Poly:
    return add(a, neg(b))


def mul(a: Poly, b: Poly) -> Poly:
    if not a or not b:
        return {}
    if len(a) < len(b):
        a, b = b, a
    if is_const(b):
        return scale(a, b[ONE_MONO])
    r: dict = {}
    for m2, c2 in b.items():
        for m1, c1 in a.items():
            m = mono_mul(m1, m2)
            r[m] = r.get(m, 0) + c1 * c2
    return {m: c for m, c in r.items() if c}


def mul_mono(p: Poly, m: Mono, c=1) -> Poly:
    c = Fraction(c)
    return {mono_mul(k, m): v * c for k, v in p.items()}


def pow_(p: Poly, n: int) -> Poly:
    if n < 0:
        raise ValueError("negative polynomial power")
    result = const(1)
    base = p
    while n:
        if n & 1:
            result = mul(result, base)
        n >>= 1
        if n:
            base = mul(base, base)
    return result


def variables(p: Poly) -> set:
    return {k for m in p for k, _ in m}


def degree_in(p: Poly, v) -> int:
    d = 0
    for m in p:
        for k, e in m:
            if k == v and e > d:
                d = e
    return d


def coeffs_in(p: Poly, v) -> dict[int, Poly]:
    """Split p as sum_i c_i v^i with c_i free of v."""
    out: dict[int, Poly] = {}
    for m, c in p.items():
        e = 0
        rest = []
        for k, ex in m:
            if k == v:
                e = ex
            else:
                rest.append((k, ex))
        out.setdefault(e, {})[tuple(rest)] = c
    return out


class NotDivisible(ArithmeticError):
    pass


def div_exact(a: Poly, b: Poly) -> Poly:
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    if is_const(b):
        return scale(a, 1 / b[ONE_MONO])
    lm_b, lc_b = leading(b)
    q: dict = {}
    r = dict(a)
    while r:
        lm_r, lc_r = leading(r)
        m = mono_div(lm_r, lm_b)
        if m is None:
            raise NotDivisible("inexact polynomial division")
        c = lc_r / lc_b
        q[m] = q.get(m, 0) + c
        r = add(r, mul_mono(b, m, -c))
    return {m: c for m, c in q.items() if c}


def integer_content_normal(p: Poly) -> Poly:
    """Scale p to integer coefficients with gcd 1 and positive leading coefficient."""
    if not p:
        return p
    den = 1
    for c in p.values():
        den = ilcm(den, c.denominator)
    num = 0
    for c in p.values():
        num = igcd(num, (c * den).numerator)
    _, lc = leading(p)
    s = Fraction(den, num) if lc > 0 else Fraction(-den, num)
    return scale(p, s)


def monic(p: Poly) -> Poly:
    if not p:
        return p
    _, lc = leading(p)
    return scale(p, 1 / lc)


def _monomial_gcd(a: Poly, b: Poly) -> Poly:
    # gcd when one argument is a single term: common power of each variable
    lo: dict | None = None
    for m in list(a) + list(b):
        d = dict(m)
        if lo is None:
            lo = d
        else:
            lo = {k: min(e, d[k]) for k, e in lo.items() if k in d}
        if not lo:
            return const(1)
    return {tuple(sorted(lo.items())): Fraction(1)}


def content_in(p: Poly, v) -> Poly:
    g: Poly = {}
    for c in coeffs_in(p, v).values():
        g = gcd(g, c) if g else monic(c)
        if is_const(g):
            return const(1)
    return g


def _prem(a: Poly, b: Poly, v) -> Poly:
    db = degree_in(b, v)
    lcb = coeffs_in(b, v)[db]
    r = a
    while r:
        dr = degree_in(r, v)
        if dr < db:
            break
        lcr = coeffs_in(r, v)[dr]
        shift = ((v, dr - db),) if dr > db else ONE_MONO
        r = sub(mul(lcb, r), mul(mul_mono(lcr, shift), b))
    return r


def _primitive_in(p: Poly, v) -> Poly:
    c = content_in(p, v)
    if not is_const(c):
        p = div_exact(p, c)
    return integer_content_normal(p)


def gcd(a: Poly, b: Poly) -> Poly:
    """Monic greatest common divisor."""
    if not a:
        return monic(b)
    if not b:
        return monic(a)
    if is_const(a) or is_const(b):
        return const(1)
    if len(a) == 1 or len(b) == 1:
        return _monomial_gcd(a, b)
    va, vb = variables(a), variables(b)
    for v in sorted(va - vb):
        a = content_in(a, v)
        if is_const(a):
            return const(1)
    for v in sorted(vb - va):
        b = content_in(b, v)
        if is_const(b):
            return const(1)
    if va - vb or vb - va:
        return gcd(a, b)
    common = sorted(va & vb)
    v = common[-1]
    ca, cb = content_in(a, v), content_in(b, v)
    gc = gcd(ca, cb)
    pa = integer_content_normal(div_exact(a, ca))
    pb = integer_content_normal(div_exact(b, cb))
    if degree_in(pa, v) < degree_in(pb, v):
        pa, pb = pb, pa
    while True:
        r = _prem(pa, pb, v)
        if not r:
            break
        if degree_in(r, v) == 0:
            pb = const(1)
            break
        pa, pb = pb, _primitive_in(r, v)
    return monic(mul(gc, pb))
