"""Symbolic matrices: determinant, inverse, left pseudo-inverse; numeric rank profiles."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .exprkit import (
    ONE,
    ZERO,
    Expr,
    as_expr,
    evaluate_many,
    is_zero,
    normalize,
    parse,
    to_text,
    total,
)
from .exprkit.zerotest import default_spec
from .verify import SampleSpec, Samples, sample_points

SVD_RTOL = 1e-10


class ShapeError(ValueError):
    pass


class SingularMatrixError(ArithmeticError):
    pass


class RankDeficientError(ArithmeticError):
    pass


class ExprMatrix:
    """Rectangular matrix of normalized expressions."""

    __slots__ = ("rows", "cols", "_e")

    def __init__(self, entries: Iterable[Iterable], normal: bool = True):
        rows = [list(r) for r in entries]
        if not rows or not rows[0]:
            raise ShapeError("matrix must have at least one row and column")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise ShapeError("ragged matrix")
        conv = (lambda v: normalize(as_expr(v))) if normal else as_expr
        self._e = tuple(tuple(conv(v) for v in r) for r in rows)
        self.rows = len(rows)
        self.cols = width

    @classmethod
    def identity(cls, k: int) -> "ExprMatrix":
        return cls([[ONE if i == j else ZERO for j in range(k)] for i in range(k)])

    @classmethod
    def zeros(cls, r: int, c: int) -> "ExprMatrix":
        return cls([[ZERO] * c for _ in range(r)])

    @classmethod
    def from_text(cls, rows: Sequence[Sequence[str]], chart=None) -> "ExprMatrix":
        return cls([[parse(str(s), chart) for s in r] for r in rows])

    @classmethod
    def from_function(cls, r: int, c: int, fn: Callable[[int, int], Expr]) -> "ExprMatrix":
        return cls([[fn(i, j) for j in range(c)] for i in range(r)])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def entries(self) -> tuple[tuple[Expr, ...], ...]:
        return self._e

    def __getitem__(self, ij: tuple[int, int]) -> Expr:
        i, j = ij
        return self._e[i][j]

    def row(self, i: int) -> tuple[Expr, ...]:
        return self._e[i]

    def col(self, j: int) -> tuple[Expr, ...]:
        return tuple(r[j] for r in self._e)

    def flat(self) -> list[Expr]:
        return [v for r in self._e for v in r]

    @property
    def T(self) -> "ExprMatrix":
        return ExprMatrix([[self._e[i][j] for i in range(self.rows)] for j in range(self.cols)], normal=False)

    def map(self, fn: Callable[[Expr], Expr]) -> "ExprMatrix":
        return ExprMatrix([[fn(v) for v in r] for r in self._e])

    def __matmul__(self, other: "ExprMatrix") -> "ExprMatrix":
        if self.cols != other.rows:
            raise ShapeError(f"cannot multiply {self.shape} by {other.shape}")
        return ExprMatrix(
            [
                [total(self._e[i][k] * other._e[k][j] for k in range(self.cols)) for j in range(other.cols)]
                for i in range(self.rows)
            ]
        )

    def _same_shape(self, other: "ExprMatrix") -> None:
        if self.shape != other.shape:
            raise ShapeError(f"shape mismatch {self.shape} vs {other.shape}")

    def __add__(self, other: "ExprMatrix") -> "ExprMatrix":
        self._same_shape(other)
        return ExprMatrix([[a + b for a, b in zip(r, s)] for r, s in zip(self._e, other._e)])

    def __sub__(self, other: "ExprMatrix") -> "ExprMatrix":
        self._same_shape(other)
        return ExprMatrix([[a - b for a, b in zip(r, s)] for r, s in zip(self._e, other._e)])

    def __neg__(self) -> "ExprMatrix":
        return self.map(lambda v: -v)

    def scale(self, s) -> "ExprMatrix":
        s = as_expr(s)
        return self.map(lambda v: s * v)

    def submatrix(self, rows: Sequence[int], cols: Sequence[int]) -> "ExprMatrix":
        return ExprMatrix([[self._e[i][j] for j in cols] for i in rows], normal=False)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ExprMatrix) and self._e == other._e

    def __hash__(self) -> int:
        return hash(self._e)

    def __repr__(self) -> str:
        return f"ExprMatrix({self.to_text()})"

    def to_text(self) -> list[list[str]]:
        return [[to_text(v) for v in r] for r in self._e]

    def evaluate(self, samples: Samples) -> np.ndarray:
        """Values at every sample point, shape (m, rows, cols); NaN where undefined."""
        vals = evaluate_many(self.flat(), samples.coords, samples.points)
        return vals.T.reshape(len(samples), self.rows, self.cols)

    def at(self, point: Mapping[str, float]) -> np.ndarray:
        coords = tuple(point)
        pts = np.array([[point[c] for c in coords]])
        return evaluate_many(self.flat(), coords, pts)[:, 0].reshape(self.rows, self.cols)


def _check_square(m: ExprMatrix) -> None:
    if m.rows != m.cols:
        raise ShapeError(f"square matrix required, got {m.shape}")


def _cofactor_det(e: list[list[Expr]]) -> Expr:
    n = len(e)
    if n == 1:
        return e[0][0]
    if n == 2:
        return e[0][0] * e[1][1] - e[0][1] * e[1][0]
    terms = []
    for j in range(n):
        if e[0][j] == ZERO:
            continue
        minor = [row[:j] + row[j + 1:] for row in e[1:]]
        t = e[0][j] * _cofactor_det(minor)
        terms.append(t if j % 2 == 0 else -t)
    return total(terms)


def _bareiss_det(e: list[list[Expr]]) -> Expr:
    a = [list(r) for r in e]
    n = len(a)
    sign = 1
    prev: Expr = ONE
    for k in range(n - 1):
        if a[k][k] == ZERO:
            swap = next((i for i in range(k + 1, n) if a[i][k] != ZERO), None)
            if swap is None:
                return ZERO
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = normalize((a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev)
        prev = a[k][k]
    d = a[n - 1][n - 1]
    return d if sign == 1 else normalize(-d)


def det(m: ExprMatrix) -> Expr:
    """Exact determinant: cofactor expansion up to 4x4, fraction-free elimination above."""
    _check_square(m)
    rows = [list(r) for r in m.entries]
    if m.rows <= 4:
        return normalize(_cofactor_det(rows))
    return _bareiss_det(rows)


def _spec_for(m: ExprMatrix, spec):
    return spec if spec is not None else default_spec(*m.flat())


def inverse(m: ExprMatrix, spec: SampleSpec | None = None) -> ExprMatrix:
    """Adjugate over determinant; refuses matrices whose determinant tests as zero."""
    _check_square(m)
    d = det(m)
    verdict = is_zero(d, _spec_for(m, spec))
    if not verdict.nonzero:
        raise SingularMatrixError(f"matrix is symbolically singular (det {d} tests {verdict.verdict})")
    n = m.rows
    if n == 1:
        return ExprMatrix([[ONE / d]])
    e = [list(r) for r in m.entries]
    adj = [[ZERO] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [row[:j] + row[j + 1:] for k, row in enumerate(e) if k != i]
            c = _cofactor_det(minor) if n - 1 <= 4 else _bareiss_det(minor)
            adj[j][i] = c if (i + j) % 2 == 0 else -c
    return ExprMatrix([[adj[i][j] / d for j in range(n)] for i in range(n)])


def left_pinv(m: ExprMatrix, spec: SampleSpec | None = None) -> ExprMatrix:
    """(M^T M)^{-1} M^T for matrices with symbolically independent columns."""
    gram = m.T @ m
    try:
        inv = inverse(gram, spec)
    except SingularMatrixError:
        raise RankDeficientError(
            "columns are not independent; use the numeric pseudo-inverse path "
            "or the degenerate-frame construction"
        ) from None
    return inv @ m.T


@dataclass(frozen=True)
class RankProfile:
    ranks: np.ndarray
    samples: Samples

    @property
    def constant(self) -> bool:
        return len(set(self.ranks.tolist())) <= 1

    @property
    def min(self) -> int:
        return int(self.ranks.min())

    @property
    def max(self) -> int:
        return int(self.ranks.max())

    def witness(self, rank: int) -> dict[str, float] | None:
        hits = np.nonzero(self.ranks == rank)[0]
        return self.samples.point(int(hits[0])) if len(hits) else None

    def to_dict(self) -> dict:
        counts = {int(r): int((self.ranks == r).sum()) for r in sorted(set(self.ranks.tolist()))}
        return {"constant": self.constant, "counts": counts}


def rank_of(a: np.ndarray, rtol: float = SVD_RTOL) -> np.ndarray:
    """Batched rank by singular-value thresholding at rtol * sigma_max."""
    s = np.linalg.svd(a, compute_uv=False)
    smax = s[..., :1]
    return np.where(smax[..., 0] > 0, (s > rtol * smax).sum(axis=-1), 0)


def numeric_rank(m: ExprMatrix, spec: SampleSpec | Samples, rtol: float = SVD_RTOL) -> RankProfile:
    samples = spec if isinstance(spec, Samples) else sample_points(spec)
    vals = m.evaluate(samples)
    ok = ~np.isnan(vals).any(axis=(1, 2))
    kept = Samples(samples.coords, samples.points[ok], samples.skipped + int((~ok).sum()))
    return RankProfile(rank_of(vals[ok], rtol), kept)


def numeric_pinv(a: np.ndarray, rtol: float = SVD_RTOL) -> np.ndarray:
    """Batched Moore-Penrose pseudo-inverse with the same threshold as numeric_rank."""
    return np.linalg.pinv(a, rcond=rtol)
