"""Further constraint systems: the C/H condition, Kotov-Strobl data, Poisson-Lie
backgrounds and Lie bialgebras, and covariance of the gauge field strength.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from .cartan import (
    FormField,
    StructFun,
    exterior_derivative,
    interior_product,
    lie_derivative,
    lifted_metric,
    rho_of,
    wedge,
)
from .closure import closure_obstruction, curvature_q, curvature_tm, flat_table
from .connections import ConnQ, ConnTM
from .exprkit import ZERO, Expr, normalize, parse, to_text, total
from .symlinalg import ExprMatrix
from .verify import Residual, SampleSpec, Samples, max_residual, sample_points

LORENTZIAN = "lorentzian"
EUCLIDEAN = "euclidean"


class PreconditionError(ValueError):
    def __init__(self, which: str, residual: Residual):
        super().__init__(f"precondition {which} fails: residual {residual.max_abs:.3g}")
        self.which = which
        self.residual = residual


def _samples(spec: SampleSpec | Samples) -> Samples:
    return spec if isinstance(spec, Samples) else sample_points(spec)


# ------------------------------------------------------------------ C/H condition

def wz_condition(C2: FormField, H: FormField | None, frame, chart, spec: SampleSpec | Samples) -> list[Residual]:
    """Per frame vector: L_{rho_a} C2 - iota_{rho_a} H; H = None means H = 0."""
    if C2.degree != 2 or (H is not None and H.degree != 3):
        raise ValueError("expected a 2-form and a 3-form")
    samples = _samples(spec)
    rho = rho_of(frame)
    out = []
    for a in range(rho.cols):
        v = rho.col(a)
        diff_form = lie_derivative(C2, v, chart)
        if H is not None:
            diff_form = diff_form - interior_product(v, H)
        out.append(max_residual(diff_form.values(), samples, f"wz[{a}]"))
    return out


# ------------------------------------------------------------------ Kotov-Strobl constraints

@dataclass(frozen=True)
class KSData:
    """alpha_a one-forms; omega and phi as [b][mu][a] tables of one-forms omega^b_a."""

    alpha: tuple[FormField, ...]
    omega: ConnTM
    phi: ConnTM
    signature: str = LORENTZIAN

    def __post_init__(self):
        if self.signature not in (LORENTZIAN, EUCLIDEAN):
            raise ValueError(f"signature must be {LORENTZIAN} or {EUCLIDEAN}")
        if any(a.degree != 1 for a in self.alpha):
            raise ValueError("alpha must consist of one-forms")

    @property
    def sign(self) -> int:
        return 1 if self.signature == LORENTZIAN else -1

    def gamma(self, frame) -> list[list[Expr]]:
        """gamma_{ab} = iota_{rho_a} alpha_b; derived, never supplied."""
        rho = rho_of(frame)
        return [[interior_product(rho.col(a), b)[()] for b in self.alpha] for a in range(rho.cols)]

    @classmethod
    def from_dict(cls, doc: Mapping, chart, signature: str | None = None) -> "KSData":
        alpha = tuple(FormField.one_form([parse(str(v), chart) for v in row]) for row in doc["alpha"])
        omega = ConnTM.from_table("+", doc["omega"], chart)
        phi = ConnTM.from_table("+", doc["phi"], chart)
        return cls(alpha, omega, phi, signature or doc.get("signature", LORENTZIAN))


def _one_form(conn: ConnTM, b: int, a: int) -> FormField:
    return FormField.one_form([conn.omega[b][mu][a] for mu in range(conn.n)])


def vee(w: FormField, u: FormField) -> dict[tuple[int, int], Expr]:
    """Symmetrized product (w v u)_{mu nu} = w_mu u_nu + w_nu u_mu, all index pairs."""
    n = w.dim
    return {(m, v): w[(m,)] * u[(v,)] + w[(v,)] * u[(m,)] for m in range(n) for v in range(n)}


def ks_constraints(
    G: ExprMatrix, H: FormField | None, frame, C: StructFun, data: KSData, chart, spec: SampleSpec | Samples
) -> dict[str, Residual]:
    samples = _samples(spec)
    rho = rho_of(frame)
    n, k = rho.rows, rho.cols
    if len(data.alpha) != k:
        raise ValueError(f"need {k} one-forms alpha, got {len(data.alpha)}")
    iG = [FormField.one_form([total(rho[l, b] * G[l, nu] for l in range(n)) for nu in range(n)]) for b in range(k)]
    d_alpha = [exterior_derivative(al, chart) for al in data.alpha]
    # H = None stands for the zero 3-form (the only one on charts of dimension < 3)
    i_H = [interior_product(rho.col(a), H) if H is not None else FormField.zero(2, n) for a in range(k)]

    ea, eb, ec, ed = [], [], [], []
    for a in range(k):
        va = rho.col(a)
        LG = lie_derivative(G, va, chart)
        rhs = {(m, v): ZERO for m in range(n) for v in range(n)}
        form_b = i_H[a] - d_alpha[a]
        for b in range(k):
            w = _one_form(data.omega, b, a)
            p = _one_form(data.phi, b, a)
            for key, val in vee(w, iG[b]).items():
                rhs[key] = rhs[key] + val
            for key, val in vee(p, data.alpha[b]).items():
                rhs[key] = rhs[key] + val
            form_b = form_b + wedge(w, data.alpha[b]) - wedge(p, iG[b]).scale(data.sign)
        ea += [LG[m, v] - rhs[(m, v)] for m in range(n) for v in range(n)]
        eb += form_b.values()
        for b in range(k):
            ec.append(ZERO)  # gamma is derived from alpha, so this vanishes identically
            lhs = lie_derivative(data.alpha[b], va, chart)
            rhs_d = interior_product(rho.col(b), d_alpha[a] - i_H[a])
            for c in range(k):
                rhs_d = rhs_d + data.alpha[c].scale(C.C[c][a][b])
            ed += (lhs - rhs_d).values()
    return {
        "ks_a": max_residual(ea, samples, "ks_a"),
        "ks_b": max_residual(eb, samples, "ks_b"),
        "ks_c": Residual("ks_c", 0.0, None, len(samples), samples.skipped, "exact"),
        "ks_d": max_residual(ed, samples, "ks_d"),
    }


# ------------------------------------------------------------------ Poisson-Lie

def _const_table(table, shape: tuple[int, ...]) -> tuple:
    if len(shape) == 1:
        if len(table) != shape[0]:
            raise ValueError("constant table has the wrong shape")
        return tuple(Fraction(v) for v in table)
    if len(table) != shape[0]:
        raise ValueError("constant table has the wrong shape")
    return tuple(_const_table(t, shape[1:]) for t in table)


@dataclass(frozen=True)
class BialgebraData:
    """C[c][a][b] = C^c_{ab} and Ct[a][b][c] = Ct^{ab}_c, exact rationals."""

    C: tuple
    Ct: tuple

    def __post_init__(self):
        k = len(self.C)
        r = range(k)
        if any(self.C[c][a][b] != -self.C[c][b][a] for c in r for a in r for b in r):
            raise ValueError("C is not antisymmetric in its lower indices")
        if any(self.Ct[a][b][c] != -self.Ct[b][a][c] for c in r for a in r for b in r):
            raise ValueError("Ct is not antisymmetric in its upper indices")
        if self.jacobi_defect() != 0:
            raise ValueError("C violates the Jacobi identity")

    @property
    def k(self) -> int:
        return len(self.C)

    @classmethod
    def from_lists(cls, C, Ct) -> "BialgebraData":
        k = len(C)
        return cls(_const_table(C, (k, k, k)), _const_table(Ct, (k, k, k)))

    def jacobi_defect(self) -> Fraction:
        C, r = self.C, range(len(self.C))
        worst = Fraction(0)
        for a in r:
            for b in r:
                for c in r:
                    for e in r:
                        s = sum(
                            C[d][a][b] * C[e][d][c] + C[d][b][c] * C[e][d][a] + C[d][c][a] * C[e][d][b] for d in r
                        )
                        worst = max(worst, abs(s))
        return worst

    def struct_fun(self) -> StructFun:
        return StructFun.from_table([[[Fraction(v) for v in row] for row in plane] for plane in self.C])

    def to_json(self) -> dict:
        def txt(t):
            return [txt(x) for x in t] if isinstance(t, tuple) else str(t)

        return {"C": txt(self.C), "Ct": txt(self.Ct)}


def cocycle_tensor(data: BialgebraData) -> list:
    """T[a][b][d][l] = C^d_{ag} Ct^{gl}_b - C^d_{bg} Ct^{gl}_a + Ct^{dg}_b C^l_{ag} - Ct^{dg}_a C^l_{bg}
    - C^g_{ab} Ct^{dl}_g."""
    C, Ct, r = data.C, data.Ct, range(data.k)
    return [
        [
            [
                [
                    sum(
                        C[d][a][g] * Ct[g][l][b]
                        - C[d][b][g] * Ct[g][l][a]
                        + Ct[d][g][b] * C[l][a][g]
                        - Ct[d][g][a] * C[l][b][g]
                        - C[g][a][b] * Ct[d][l][g]
                        for g in r
                    )
                    for l in r
                ]
                for d in r
            ]
            for b in r
        ]
        for a in r
    ]


def bialgebra_cocycle(data: BialgebraData) -> Residual:
    """Exact max-abs of the cocycle tensor."""
    T = cocycle_tensor(data)
    worst, where = Fraction(0), None
    r = range(data.k)
    for a in r:
        for b in r:
            for d in r:
                for l in r:
                    if abs(T[a][b][d][l]) > worst:
                        worst, where = abs(T[a][b][d][l]), {"a": a, "b": b, "d": d, "l": l}
    return Residual("bialgebra cocycle", float(worst), where, 1, 0, "exact")


def pl_condition(E: ExprMatrix, frame, Ct, chart, spec: SampleSpec | Samples) -> list[Residual]:
    """Per frame vector: (L_a E)_{mu nu} - Ct^{kl}_a rho^l_k rho^t_l E_{l nu} E_{mu t}."""
    samples = _samples(spec)
    rho = rho_of(frame)
    n, k = rho.rows, rho.cols
    Er = E @ rho  # E_{mu t} rho^t_l
    Etr = E.T @ rho  # E_{l nu} rho^l_k
    out = []
    for a in range(k):
        LE = lie_derivative(E, rho.col(a), chart)
        exprs = [
            LE[mu, nu]
            - total(Fraction(Ct[p][q][a]) * Etr[nu, p] * Er[mu, q] for p in range(k) for q in range(k) if Ct[p][q][a])
            for mu in range(n)
            for nu in range(n)
        ]
        out.append(max_residual(exprs, samples, f"pl[{a}]"))
    return out


@dataclass(frozen=True)
class PLConnections:
    q_plus: ConnQ
    q_minus: ConnQ
    curvature_plus: Residual
    curvature_minus: Residual


def pl_connections(
    E: ExprMatrix, frame, data: BialgebraData, chart, spec: SampleSpec | Samples, tol: float | None = None
) -> PLConnections:
    """QOmega+ = C and QOmega-^a_{bc} = Ct^{ad}_b Eb_{cd} + C^a_{bc}, with both Q-curvatures."""
    samples = _samples(spec)
    tol = tol if tol is not None else (spec.tol if isinstance(spec, SampleSpec) else 1e-9)
    cocycle = bialgebra_cocycle(data)
    if not cocycle.ok(0):
        raise PreconditionError("bialgebra cocycle", cocycle)
    for res in pl_condition(E, frame, data.Ct, chart, samples):
        if not res.ok(tol):
            raise PreconditionError("Poisson-Lie condition", res)
    k = data.k
    C = data.struct_fun()
    Eb = lifted_metric(E, frame)
    qp = ConnQ("+", C.C)
    qm = ConnQ(
        "-",
        tuple(
            tuple(
                tuple(
                    normalize(total(data.Ct[a][d][b] * Eb[c, d] for d in range(k) if data.Ct[a][d][b]) + C.C[a][b][c])
                    for c in range(k)
                )
                for b in range(k)
            )
            for a in range(k)
        ),
    )
    Rp = max_residual(flat_table(curvature_q(qp, frame, C, chart)), samples, "Q-curvature (+)")
    Rm = max_residual(flat_table(curvature_q(qm, frame, C, chart)), samples, "Q-curvature (-)")
    return PLConnections(qp, qm, Rp, Rm)


# ------------------------------------------------------------------ field strength

@dataclass(frozen=True)
class FieldStrength:
    R: tuple  # [a][mu][nu][b]
    D: tuple  # [a][b][c][mu]
    curvature: Residual
    deviation: Residual
    tol: float

    @property
    def covariant(self) -> bool:
        return self.curvature.ok(self.tol) and self.deviation.ok(self.tol)

    def to_dict(self) -> dict:
        def txt(t):
            return to_text(t) if isinstance(t, Expr) else [txt(x) for x in t]

        return {
            "covariant": self.covariant,
            "curvature": self.curvature.to_dict(),
            "D": self.deviation.to_dict(),
            "R_table": {"index_order": "[a][mu][nu][b]", "table": txt(self.R)},
            "D_table": {"index_order": "[a][b][c][mu]", "table": txt(self.D)},
        }


def field_strength_covariance(
    frame, omega: ConnTM, C: StructFun, chart, spec: SampleSpec | Samples, tol: float | None = None
) -> FieldStrength:
    """Curvature of omega and D = (nabla T) - (rho R terms), i.e. minus the closure obstruction."""
    samples = _samples(spec)
    tol = tol if tol is not None else (spec.tol if isinstance(spec, SampleSpec) else 1e-9)
    R = curvature_tm(omega, chart)
    O = closure_obstruction(frame, omega, C, chart).table
    k, n = omega.k, omega.n
    D = tuple(
        tuple(tuple(tuple(normalize(-O[a][mu][b][c]) for mu in range(n)) for c in range(k)) for b in range(k))
        for a in range(k)
    )
    return FieldStrength(
        R,
        D,
        max_residual(flat_table(R), samples, "field strength curvature"),
        max_residual(flat_table(D), samples, "field strength D"),
        tol,
    )
