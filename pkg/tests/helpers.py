"""Seeded random fixtures on the plane, shared by several test modules."""
from __future__ import annotations

import random

from gaugekit.cartan import structure_functions
from gaugekit.connections import ConnQ
from gaugekit.exprkit import parse
from gaugekit.geomodel import Chart, VectorFrame
from gaugekit.symlinalg import ExprMatrix

PLANE = Chart(("x", "y"))
MONOMIALS = ("1", "x", "y", "x^2", "x*y", "y^2")


def random_poly(rng: random.Random, terms: tuple[str, ...] = MONOMIALS, coeffs=(-1, 0, 0, 1)) -> str:
    parts = [f"({rng.choice(coeffs)})*{m}" for m in terms]
    return "+".join(parts)


def random_metric(rng: random.Random) -> ExprMatrix:
    """Degree <= 2 polynomial E, shifted by 4I so the lifted metric stays invertible.

    Coefficients are kept small: curvature tables grow fast with the entries,
    and the 1e-9 absolute tolerance leaves no room for ill-conditioned data.
    """
    rows = []
    for i in range(2):
        rows.append([f"{4 if i == j else 0}+{random_poly(rng)}" for j in range(2)])
    return ExprMatrix.from_text(rows, PLANE)


def random_frame(rng: random.Random, family: int) -> VectorFrame:
    """Unimodular plane frames whose structure functions are nonconstant."""
    p = random_poly(rng, ("x", "y", "x*y", "y^2"), ("-1/2", "1/2"))
    if family == 0:
        # [d_x + p d_y, d_y] = -(d_y p) d_y
        vecs = [["1", p], ["0", "1"]]
    else:
        q = random_poly(rng, ("x", "x^2"), ("-1/2", "1/2"))
        # [d_x, q d_x + d_y] = q' d_x
        vecs = [["1", "0"], [q, "1"]]
    return VectorFrame.from_vectors(f"random{family}", [[parse(v, PLANE) for v in vec] for vec in vecs])


def random_qconn(rng: random.Random, k: int = 2, sign: str = "-") -> ConnQ:
    table = [[[random_poly(rng, ("1", "x", "y"), (-1, 0, 1)) for _ in range(k)] for _ in range(k)] for _ in range(k)]
    return ConnQ.from_table(sign, table, PLANE)


def random_case(seed: int):
    """(E, frame, C) for one seed; alternates the two frame families."""
    rng = random.Random(seed)
    E = random_metric(rng)
    frame = random_frame(rng, seed % 2)
    C = structure_functions(frame, PLANE, PLANE.cube(count=64, seed=seed))
    return E, frame, C

