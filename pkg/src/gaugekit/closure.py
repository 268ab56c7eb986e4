"""Torsion, curvatures, the closure obstruction and the curvature duality identity.

Index layouts:
    torsion T[a][b][c] = T^a_{bc}
    TM curvature R[a][mu][nu][b] = R^a_{mu nu b}
    Q curvature R[d][a][b][c] = R^d_{abc}, a and b the two directions
    obstruction O[a][mu][b][c]
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cartan import StructFun, coords_of, directional, rho_of
from .connections import ConnQ, ConnTM, maurer_cartan
from .exprkit import ZERO, Expr, diff, evaluate_many, normalize, to_text, total, tree_diff
from .symlinalg import ExprMatrix, RankDeficientError, inverse, left_pinv
from .verify import Residual, SampleSpec, Samples, max_residual, residual_from_values, sample_points


def flat_table(table) -> list[Expr]:
    if isinstance(table, Expr):
        return [table]
    return [v for t in table for v in flat_table(t)]


def _text(table):
    if isinstance(table, Expr):
        return to_text(table)
    return [_text(t) for t in table]


def _keep(e: Expr) -> Expr:
    return e


def _tree_directional(v, f: Expr, coords) -> Expr:
    return total(v[i] * tree_diff(f, c) for i, c in enumerate(coords) if v[i] != ZERO)


def _ops(exact: bool):
    """(directional derivative, finisher): canonical forms, or raw trees for numeric use only."""
    return (directional, normalize) if exact else (_tree_directional, _keep)


def _require_symbolic(omega: ConnTM) -> None:
    if not omega.symbolic:
        raise ValueError("this operation needs a symbolic connection table")


def torsion_T(frame, omega: ConnTM, C: StructFun) -> tuple:
    """T^a_{bc} = rho^mu_b Omega^a_{mu c} - rho^mu_c Omega^a_{mu b} - C^a_{bc}."""
    _require_symbolic(omega)
    rho = rho_of(frame)
    n, k = rho.rows, rho.cols
    W = omega.omega
    return tuple(
        tuple(
            tuple(
                normalize(
                    total(rho[mu, b] * W[a][mu][c] - rho[mu, c] * W[a][mu][b] for mu in range(n)) - C.C[a][b][c]
                )
                for c in range(k)
            )
            for b in range(k)
        )
        for a in range(k)
    )


def curvature_tm(omega: ConnTM, chart) -> tuple:
    """R^a_{mu nu b} = d_mu Omega^a_{nu b} - d_nu Omega^a_{mu b} + [Omega_mu, Omega_nu]^a_b."""
    _require_symbolic(omega)
    coords = coords_of(chart)
    W = omega.omega
    k, n = omega.k, omega.n
    dW = [[[[diff(W[a][nu][b], coords[mu]) for b in range(k)] for nu in range(n)] for a in range(k)] for mu in range(n)]
    out = []
    for a in range(k):
        plane = []
        for mu in range(n):
            row = []
            for nu in range(n):
                if mu == nu:
                    row.append(tuple(ZERO for _ in range(k)))
                    continue
                row.append(
                    tuple(
                        normalize(
                            dW[mu][a][nu][b]
                            - dW[nu][a][mu][b]
                            + total(W[a][mu][c] * W[c][nu][b] - W[a][nu][c] * W[c][mu][b] for c in range(k))
                        )
                        for b in range(k)
                    )
                )
            plane.append(tuple(row))
        out.append(tuple(plane))
    return tuple(out)


def covariant_torsion(omega: ConnTM, T: tuple, chart) -> tuple:
    """(nabla_mu T)^a_{bc}, returned as [a][mu][b][c]."""
    _require_symbolic(omega)
    coords = coords_of(chart)
    W = omega.omega
    k, n = omega.k, omega.n
    return tuple(
        tuple(
            tuple(
                tuple(
                    normalize(
                        diff(T[a][b][c], coords[mu])
                        + total(W[a][mu][d] * T[d][b][c] for d in range(k))
                        - total(W[d][mu][b] * T[a][d][c] for d in range(k))
                        - total(W[d][mu][c] * T[a][b][d] for d in range(k))
                    )
                    for c in range(k)
                )
                for b in range(k)
            )
            for mu in range(n)
        )
        for a in range(k)
    )


def adjoint_connection(frame, omega: ConnTM, C: StructFun) -> ConnQ:
    """QOmega^a_{bc} = rho^mu_c Omega^a_{mu b} + C^a_{bc}.

    Read as the covariant derivative of e_c along e_b, this already has the
    direction in the middle slot, so no transposition is applied.
    """
    _require_symbolic(omega)
    rho = rho_of(frame)
    n, k = rho.rows, rho.cols
    W = omega.omega
    return ConnQ(
        omega.sign,
        tuple(
            tuple(
                tuple(normalize(total(rho[mu, c] * W[a][mu][b] for mu in range(n)) + C.C[a][b][c]) for c in range(k))
                for b in range(k)
            )
            for a in range(k)
        ),
    )


def curvature_q(qomega: ConnQ, frame, C: StructFun, chart, exact: bool = True) -> tuple:
    """R^d_{abc} = rho_a Q^d_{bc} - rho_b Q^d_{ac} + Q^d_{ae} Q^e_{bc} - Q^d_{be} Q^e_{ac} - C^e_{ab} Q^d_{ec}.

    With exact=False the entries are left as unsimplified trees, fit only for evaluation.
    """
    dirv, fin = _ops(exact)
    coords = coords_of(chart)
    rho = rho_of(frame)
    k = rho.cols
    Q = qomega.omega
    dQ = [[[[dirv(rho.col(a), Q[d][b][c], coords) for c in range(k)] for b in range(k)] for d in range(k)]
          for a in range(k)]
    return tuple(
        tuple(
            tuple(
                tuple(
                    fin(
                        dQ[a][d][b][c]
                        - dQ[b][d][a][c]
                        + total(Q[d][a][e] * Q[e][b][c] - Q[d][b][e] * Q[e][a][c] for e in range(k))
                        - total(C.C[e][a][b] * Q[d][e][c] for e in range(k))
                    )
                    if a != b
                    else ZERO
                    for c in range(k)
                )
                for b in range(k)
            )
            for a in range(k)
        )
        for d in range(k)
    )


INJECTIVE_NOTE = "R_Q flat; closure implied only for injective anchor"


@dataclass(frozen=True)
class ObstructionTable:
    """O^a_{mu bc} = -(nabla_mu T)^a_{bc} + rho^nu_b R^a_{mu nu c} - rho^nu_c R^a_{mu nu b}."""

    sign: str
    table: tuple  # [a][mu][b][c]
    injective: bool

    def flat(self) -> list[Expr]:
        return flat_table(self.table)

    def residual(self, spec: SampleSpec | Samples, name: str | None = None) -> Residual:
        res = max_residual(self.flat(), spec, name or f"closure obstruction ({self.sign})")
        if not self.injective:
            res = Residual(res.name, res.max_abs, res.witness, res.samples_used, res.samples_skipped,
                           res.provenance, {"note": INJECTIVE_NOTE})
        return res

    def to_json(self) -> dict:
        return {"sign": self.sign, "index_order": "[a][mu][b][c]", "table": _text(self.table)}


def closure_obstruction(frame, omega: ConnTM, C: StructFun, chart, injective: bool | None = None) -> ObstructionTable:
    rho = rho_of(frame)
    n, k = rho.rows, rho.cols
    T = torsion_T(frame, omega, C)
    dT = covariant_torsion(omega, T, chart)
    R = curvature_tm(omega, chart)
    table = tuple(
        tuple(
            tuple(
                tuple(
                    normalize(
                        -dT[a][mu][b][c]
                        + total(rho[nu, b] * R[a][mu][nu][c] - rho[nu, c] * R[a][mu][nu][b] for nu in range(n))
                    )
                    for c in range(k)
                )
                for b in range(k)
            )
            for mu in range(n)
        )
        for a in range(k)
    )
    if injective is None:
        try:
            left_pinv(rho)
            injective = True
        except RankDeficientError:
            injective = False
    return ObstructionTable(omega.sign, table, injective)


def table_residual(table, spec: SampleSpec | Samples, name: str) -> Residual:
    return max_residual(flat_table(table), spec, name)


def mc_form_check(qomega: ConnQ, frame, K: ExprMatrix, chart, spec: SampleSpec | Samples) -> Residual:
    """Distance of QOmega from the Maurer-Cartan form K^{-1} d_Q K."""
    ref = maurer_cartan(K, frame, chart, qomega.sign, spec if isinstance(spec, SampleSpec) else None)
    return max_residual([x - y for x, y in zip(qomega.flat(), ref.flat())], spec, "maurer-cartan form")


def invertible_solution(Eb: ExprMatrix, frame, qminus: ConnQ, chart, spec: SampleSpec | None = None,
                        exact: bool = True) -> ConnQ:
    """QOmega+^b_{ac} = (Eb^{-1})^{bd} rho_a(Eb_{dc}) - Eb_{dc} QOmega-^d_{ae} (Eb^{-1})^{be}."""
    dirv, fin = _ops(exact)
    coords = coords_of(chart)
    rho = rho_of(frame)
    k = rho.cols
    Ei = inverse(Eb, spec)
    Qm = qminus.omega
    dE = [[[dirv(rho.col(a), Eb[d, c], coords) for c in range(k)] for d in range(k)] for a in range(k)]
    return ConnQ(
        "+",
        tuple(
            tuple(
                tuple(
                    fin(
                        total(Ei[b, d] * dE[a][d][c] for d in range(k))
                        - total(Eb[d, c] * Qm[d][a][e] * Ei[b, e] for d in range(k) for e in range(k))
                    )
                    for c in range(k)
                )
                for a in range(k)
            )
            for b in range(k)
        ),
    )


def lifted_killing_exprs(Eb: ExprMatrix, frame, qplus: ConnQ, qminus: ConnQ, chart) -> list[Expr]:
    """rho_a(Eb_{dc}) - Eb_{db} QOmega+^b_{ac} - Eb_{bc} QOmega-^b_{ad}, over all a, d, c."""
    coords = coords_of(chart)
    rho = rho_of(frame)
    k = rho.cols
    Qp, Qm = qplus.omega, qminus.omega
    out = []
    for a in range(k):
        for d in range(k):
            for c in range(k):
                out.append(
                    directional(rho.col(a), Eb[d, c], coords)
                    - total(Eb[d, b] * Qp[b][a][c] for b in range(k))
                    - total(Eb[b, c] * Qm[b][a][d] for b in range(k))
                )
    return out


def curvature_duality_check(
    Eb: ExprMatrix, frame, C: StructFun, qminus: ConnQ, chart, spec: SampleSpec | Samples
) -> Residual:
    """R+^d_{abc} + Eb_{ec} R-^e_{abf} (Eb^{-1})^{df}, sampled."""
    sspec = spec if isinstance(spec, SampleSpec) else None
    qplus = invertible_solution(Eb, frame, qminus, chart, sspec, exact=False)
    Rp = curvature_q(qplus, frame, C, chart, exact=False)
    Rm = curvature_q(qminus, frame, C, chart, exact=False)
    Ei = inverse(Eb, sspec)
    k = Eb.rows
    samples = spec if isinstance(spec, Samples) else sample_points(spec)
    # everything below is numeric: canonical forms of these tables are costly and add nothing here
    rp = _values(flat_table(Rp), samples).reshape((-1,) + (k,) * 4)
    rm = _values(flat_table(Rm), samples).reshape((-1,) + (k,) * 4)
    E = Eb.evaluate(samples)
    Einv = Ei.evaluate(samples)
    resid = rp + np.einsum("mec,meabf,mdf->mdabc", E, rm, Einv)
    return residual_from_values("curvature duality", resid, samples)


def _values(exprs: list[Expr], samples: Samples) -> np.ndarray:
    return evaluate_many(exprs, samples.coords, samples.points).T
