"""Connection coefficient tables.

ConnTM holds Omega^a_{mu b}: upper frame index a, coordinate direction mu,
lower frame index b.  ConnQ holds QOmega^a_{bc} with the middle index b the
differentiation direction, so a Maurer-Cartan connection reads
QOmega^a_{bc} = (K^{-1})^a_d rho_b(K^d_c).

A ConnTM is either symbolic (`omega` filled) or sampled (`values` filled,
tied to one Samples object); the sampled form appears only when a
pseudo-inverse had to be taken point by point.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cartan import coords_of, directional, rho_of
from .exprkit import ZERO, Expr, as_expr, normalize, parse, to_text, total
from .symlinalg import ExprMatrix, inverse
from .verify import Samples

SIGNS = ("+", "-")


def _check_sign(sign: str) -> str:
    if sign not in SIGNS:
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")
    return sign


def _table(data, shape: tuple[int, ...], chart=None, normal: bool = True):
    if len(shape) == 1:
        if len(data) != shape[0]:
            raise ValueError(f"expected {shape[0]} entries, got {len(data)}")
        conv = (lambda v: parse(v, chart)) if chart is not None else as_expr
        return tuple(normalize(conv(v)) if normal else conv(v) for v in data)
    if len(data) != shape[0]:
        raise ValueError(f"expected {shape[0]} entries, got {len(data)}")
    return tuple(_table(d, shape[1:], chart, normal) for d in data)


def _text(table) -> list:
    if isinstance(table, Expr):
        return to_text(table)
    return [_text(t) for t in table]


def _same_points(a: Samples, b: Samples) -> bool:
    return a is b or (a.coords == b.coords and np.array_equal(a.points, b.points))


@dataclass(frozen=True)
class ConnTM:
    sign: str
    omega: tuple | None = None  # [a][mu][b]
    values: np.ndarray | None = None  # (m, k, n, k)
    samples: Samples | None = None

    def __post_init__(self):
        _check_sign(self.sign)
        if (self.omega is None) == (self.values is None):
            raise ValueError("exactly one of omega or values must be given")
        if self.values is not None and self.samples is None:
            raise ValueError("sampled connection needs its samples")

    @classmethod
    def from_table(cls, sign: str, table, chart=None) -> "ConnTM":
        k = len(table)
        n = len(table[0])
        return cls(sign, _table(table, (k, n, k), chart))

    @classmethod
    def zero(cls, sign: str, k: int, n: int) -> "ConnTM":
        return cls(sign, tuple(tuple(tuple(ZERO for _ in range(k)) for _ in range(n)) for _ in range(k)))

    @property
    def symbolic(self) -> bool:
        return self.omega is not None

    @property
    def k(self) -> int:
        return len(self.omega) if self.symbolic else self.values.shape[1]

    @property
    def n(self) -> int:
        return len(self.omega[0]) if self.symbolic else self.values.shape[2]

    def __getitem__(self, amb: tuple[int, int, int]) -> Expr:
        a, mu, b = amb
        return self.omega[a][mu][b]

    def matrix(self, a: int) -> ExprMatrix:
        """Per-gauge-index view (Omega_a)^b_mu = Omega^b_{mu a}, a k x n matrix."""
        return ExprMatrix([[self.omega[b][mu][a] for mu in range(self.n)] for b in range(self.k)], normal=False)

    def flat(self) -> list[Expr]:
        return [v for plane in self.omega for row in plane for v in row]

    def evaluate(self, samples: Samples) -> np.ndarray:
        """Values at the samples, shape (m, k, n, k)."""
        if not self.symbolic:
            if not _same_points(self.samples, samples):
                raise ValueError("sampled connection evaluated on foreign sample points")
            return self.values
        from .exprkit import evaluate_many

        vals = evaluate_many(self.flat(), samples.coords, samples.points)
        return vals.T.reshape(len(samples), self.k, self.n, self.k)

    def map(self, fn) -> "ConnTM":
        return ConnTM(self.sign, tuple(tuple(tuple(fn(v) for v in row) for row in plane) for plane in self.omega))

    def to_json(self) -> dict:
        if not self.symbolic:
            return {"sign": self.sign, "sampled": True, "omega": None}
        return {"sign": self.sign, "index_order": "[a][mu][b]", "omega": _text(self.omega)}

    @classmethod
    def from_json(cls, doc: dict, chart=None) -> "ConnTM":
        return cls.from_table(doc.get("sign", "+"), doc["omega"], chart)


@dataclass(frozen=True)
class ConnQ:
    sign: str
    omega: tuple  # [a][b][c], b = direction

    def __post_init__(self):
        _check_sign(self.sign)

    @classmethod
    def from_table(cls, sign: str, table, chart=None) -> "ConnQ":
        k = len(table)
        return cls(sign, _table(table, (k, k, k), chart))

    @classmethod
    def zero(cls, sign: str, k: int) -> "ConnQ":
        return cls(sign, tuple(tuple(tuple(ZERO for _ in range(k)) for _ in range(k)) for _ in range(k)))

    @property
    def k(self) -> int:
        return len(self.omega)

    def __getitem__(self, abc: tuple[int, int, int]) -> Expr:
        a, b, c = abc
        return self.omega[a][b][c]

    def direction(self, b: int) -> ExprMatrix:
        """Matrix (A_b)^a_c = QOmega^a_{bc} for one differentiation direction."""
        return ExprMatrix([[self.omega[a][b][c] for c in range(self.k)] for a in range(self.k)], normal=False)

    def flat(self) -> list[Expr]:
        return [v for plane in self.omega for row in plane for v in row]

    def is_zero(self) -> bool:
        return all(v == ZERO for v in self.flat())

    def to_json(self) -> dict:
        return {"sign": self.sign, "index_order": "[a][b][c], b = direction", "omega": _text(self.omega)}

    @classmethod
    def from_json(cls, doc: dict, chart=None) -> "ConnQ":
        return cls.from_table(doc.get("sign", "+"), doc["omega"], chart)


def maurer_cartan(K: ExprMatrix, frame, chart, sign: str = "+", spec=None) -> ConnQ:
    """QOmega^a_{bc} = (K^{-1})^a_d rho_b(K^d_c); flat for every invertible K."""
    coords = coords_of(chart)
    rho = rho_of(frame)
    k = rho.cols
    if K.shape != (k, k):
        raise ValueError(f"K must be {k}x{k}, got {K.shape}")
    Ki = inverse(K, spec)
    dK = [[[directional(rho.col(b), K[d, c], coords) for c in range(k)] for d in range(k)] for b in range(k)]
    return ConnQ(
        sign,
        tuple(
            tuple(
                tuple(normalize(total(Ki[a, d] * dK[b][d][c] for d in range(k))) for c in range(k))
                for b in range(k)
            )
            for a in range(k)
        ),
    )


def pure_gauge(K: ExprMatrix, chart, sign: str = "+", spec=None) -> ConnTM:
    """Omega^a_{mu b} = (K^{-1})^a_c d_mu K^c_b; curvature-free by construction."""
    from .exprkit import diff

    coords = coords_of(chart)
    k = K.rows
    Ki = inverse(K, spec)
    return ConnTM(
        sign,
        tuple(
            tuple(
                tuple(normalize(total(Ki[a, c] * diff(K[c, b], mu) for c in range(k))) for b in range(k))
                for mu in coords
            )
            for a in range(k)
        ),
    )

