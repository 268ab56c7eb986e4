"""Brackets, structure functions, Lie derivatives and exterior calculus on one chart.

Conventions: a p-form is stored by its totally antisymmetric components
omega_{mu1..mup}, so that omega = (1/p!) omega_{mu...} dx^mu ^ ...; the
interior product contracts the first slot; (alpha ^ beta)_{mu nu} =
alpha_mu beta_nu - alpha_nu beta_mu.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np

from .exprkit import ZERO, Expr, as_expr, diff, normalize, total
from .symlinalg import ExprMatrix, RankDeficientError, left_pinv, numeric_rank
from .verify import Residual, SampleSpec, Samples, max_residual, sample_points

Vector = tuple


class NonInvolutiveError(ValueError):
    def __init__(self, message: str, witness: Mapping[str, float] | None, residual: "Residual | None" = None):
        super().__init__(f"{message} (witness {dict(witness) if witness else None})")
        self.witness = witness
        self.residual = residual


class StructureFunctionsRequired(ValueError):
    pass


def coords_of(chart) -> tuple[str, ...]:
    return tuple(getattr(chart, "coords", chart))


def rho_of(frame) -> ExprMatrix:
    return frame if isinstance(frame, ExprMatrix) else frame.rho


def frame_vectors(frame) -> list[Vector]:
    rho = rho_of(frame)
    return [rho.col(a) for a in range(rho.cols)]


# ------------------------------------------------------------------ vectors

def directional(v: Sequence[Expr], f: Expr, coords: Sequence[str]) -> Expr:
    """v(f) = v^mu d_mu f (not normalized)."""
    return total(v[i] * diff(f, c) for i, c in enumerate(coords) if v[i] != ZERO)


def lie_bracket(v: Sequence[Expr], w: Sequence[Expr], chart) -> Vector:
    coords = coords_of(chart)
    return tuple(
        normalize(directional(v, w[mu], coords) - directional(w, v[mu], coords)) for mu in range(len(coords))
    )


@dataclass(frozen=True)
class StructFun:
    """C[c][a][b] = C^c_{ab} with [rho_a, rho_b] = C^c_{ab} rho_c."""

    C: tuple
    residual: Residual | None = None

    @property
    def k(self) -> int:
        return len(self.C)

    def __getitem__(self, cab: tuple[int, int, int]) -> Expr:
        c, a, b = cab
        return self.C[c][a][b]

    @classmethod
    def zero(cls, k: int) -> "StructFun":
        return cls(tuple(tuple(tuple(ZERO for _ in range(k)) for _ in range(k)) for _ in range(k)))

    @classmethod
    def from_table(cls, table, residual: Residual | None = None) -> "StructFun":
        k = len(table)
        return cls(
            tuple(tuple(tuple(normalize(as_expr(table[c][a][b])) for b in range(k)) for a in range(k)) for c in range(k)),
            residual,
        )

    @classmethod
    def from_entries(cls, k: int, entries: Mapping[tuple[int, int, int], Expr]) -> "StructFun":
        """Build from C^c_{ab} for listed (c, a, b); the (c, b, a) entries follow by antisymmetry."""
        t = [[[ZERO] * k for _ in range(k)] for _ in range(k)]
        for (c, a, b), v in entries.items():
            v = normalize(as_expr(v))
            if a == b and v != ZERO:
                raise ValueError(f"C^{c}_{{{a}{b}}} must vanish")
            if (c, b, a) in entries and normalize(entries[(c, b, a)] + v) != ZERO:
                raise ValueError(f"C^{c}_{{{a}{b}}} and C^{c}_{{{b}{a}}} are not antisymmetric")
            t[c][a][b] = v
            t[c][b][a] = normalize(-v)
        return cls.from_table(t)

    def is_constant(self) -> bool:
        from .exprkit import Const

        return all(isinstance(v, Const) for plane in self.C for row in plane for v in row)

    def to_json(self) -> list:
        return [[[str(v) for v in row] for row in plane] for plane in self.C]


def _brackets(frame, chart) -> dict[tuple[int, int], Vector]:
    vs = frame_vectors(frame)
    return {(a, b): lie_bracket(vs[a], vs[b], chart) for a, b in combinations(range(len(vs)), 2)}


def _bracket_exprs(frame, br, C: StructFun) -> list[Expr]:
    rho = rho_of(frame)
    out = []
    for (a, b), vec in br.items():
        for mu in range(rho.rows):
            out.append(vec[mu] - total(C.C[c][a][b] * rho[mu, c] for c in range(rho.cols)))
    return out


def _span_defect(frame, br, samples: Samples, rel: float = 1e-10) -> np.ndarray:
    """Per point: largest distance of a bracket from the numeric column span of rho.

    Singular values below rel * s_max count as zero when fixing the span.
    """
    rho = rho_of(frame)
    R = rho.evaluate(samples)
    keys = list(br)
    if not keys:
        return np.zeros(len(samples))
    B = ExprMatrix([[br[key][mu] for key in keys] for mu in range(rho.rows)], normal=False).evaluate(samples)
    out = np.full(len(samples), np.nan)
    for i in range(len(samples)):
        if np.isnan(R[i]).any() or np.isnan(B[i]).any():
            continue
        u, s, _ = np.linalg.svd(R[i], full_matrices=True)
        r = int((s > rel * s[0]).sum()) if s.size and s[0] > 0 else 0
        perp = u[:, r:]
        out[i] = np.abs(perp.T @ B[i]).max() if perp.size else 0.0
    return out


def _deficient_points(frame, samples: Samples, k: int) -> list[int]:
    prof = numeric_rank(rho_of(frame), samples)
    idx = [i for i, r in enumerate(prof.ranks) if r < k]
    # map back onto the original sample indices (numeric_rank drops failed points)
    kept = [tuple(p) for p in prof.samples.points]
    lookup = {tuple(p): i for i, p in enumerate(samples.points)}
    return [lookup[kept[i]] for i in idx]


def _refine_singular(frame, samples: Samples, tries: int = 3) -> list[dict[str, float]]:
    """Locally minimise sigma_min/sigma_max of rho from the worst-conditioned samples."""
    from scipy.optimize import minimize

    rho = rho_of(frame)
    R = rho.evaluate(samples)
    coords = samples.coords
    conds = []
    for i in range(len(samples)):
        if np.isnan(R[i]).any():
            continue
        s = np.linalg.svd(R[i], compute_uv=False)
        conds.append((s[-1] / s[0] if s[0] > 0 else 0.0, i))
    conds.sort()
    lo = samples.points.min(axis=0)
    hi = samples.points.max(axis=0)
    found = []
    for _, i in conds[:tries]:
        def objective(p):
            vals = rho.at(dict(zip(coords, p)))
            if np.isnan(vals).any():
                return 1.0
            s = np.linalg.svd(vals, compute_uv=False)
            return s[-1] / s[0] if s[0] > 0 else 0.0

        res = minimize(objective, samples.points[i], method="L-BFGS-B", bounds=list(zip(lo, hi)))
        if res.fun < 1e-8:
            found.append(dict(zip(coords, map(float, res.x))))
    return found


def structure_functions(
    frame,
    chart,
    spec: SampleSpec | Samples | None = None,
    override: StructFun | None = None,
) -> StructFun:
    """Structure functions of an involutive frame, with an involutivity certificate."""
    coords = coords_of(chart)
    spec = spec if spec is not None else SampleSpec.cube(coords)
    samples = spec if isinstance(spec, Samples) else sample_points(spec)
    tol = spec.tol if isinstance(spec, SampleSpec) else 1e-9
    rho = rho_of(frame)
    k = rho.cols
    br = _brackets(frame, chart)

    if override is not None:
        res = max_residual(_bracket_exprs(frame, br, override), samples, "bracket reconstruction")
        if not res.ok(tol):
            raise NonInvolutiveError("supplied structure functions do not reproduce the brackets", res.witness, res)
        return StructFun(override.C, res)

    bad = _deficient_points(frame, samples, k)
    suspects = [samples.point(i) for i in bad] or _refine_singular(frame, samples)
    # optimiser-located drops are only approximate (ratio < 1e-8) and the defect
    # shrinks linearly towards the true drop, so those points get looser cutoffs
    bound, rel = (tol, 1e-10) if bad else (max(tol, tol ** 0.5), 1e-6)
    if suspects:
        sub = Samples(coords, np.array([[p[c] for c in coords] for p in suspects]))
        defect = _span_defect(frame, br, sub, rel)
        if not np.isnan(defect).all():
            j = int(np.nanargmax(defect))
            if defect[j] > bound:
                res = Residual("span defect", float(defect[j]), sub.point(j), len(sub), 0)
                raise NonInvolutiveError("bracket leaves the span where the frame degenerates", sub.point(j), res)
    try:
        rp = left_pinv(rho)
    except RankDeficientError:
        raise StructureFunctionsRequired("frame is rank-deficient: supply structure_functions") from None

    table = [[[ZERO] * k for _ in range(k)] for _ in range(k)]
    for (a, b), vec in br.items():
        for c in range(k):
            v = normalize(total(rp[c, mu] * vec[mu] for mu in range(rho.rows)))
            table[c][a][b] = v
            table[c][b][a] = normalize(-v)
    C = StructFun.from_table(table)
    res = max_residual(_bracket_exprs(frame, br, C), samples, "bracket reconstruction")
    if not res.ok(tol):
        raise NonInvolutiveError("frame is not involutive", res.witness, res)
    if suspects:
        res = Residual(res.name, res.max_abs, res.witness, res.samples_used, res.samples_skipped,
                       detail={"rank_drops": len(suspects), "first_drop": suspects[0]})
    return StructFun(C.C, res)


# ------------------------------------------------------------------ forms

def _sort_sign(idx: Sequence[int]) -> tuple[int, tuple[int, ...]]:
    idx = list(idx)
    if len(set(idx)) < len(idx):
        return 0, ()
    sign = 1
    for i in range(len(idx)):
        for j in range(len(idx) - 1 - i):
            if idx[j] > idx[j + 1]:
                idx[j], idx[j + 1] = idx[j + 1], idx[j]
                sign = -sign
    return sign, tuple(idx)


class FormField:
    """Differential p-form (p <= 3) by its independent components (ascending indices)."""

    __slots__ = ("degree", "dim", "comps")

    def __init__(self, degree: int, dim: int, comps: Mapping[tuple[int, ...], Expr] | None = None):
        if not 0 <= degree <= 3:
            raise ValueError("form degree must be 0..3")
        if degree > dim:
            raise ValueError("form degree exceeds dimension")
        self.degree = degree
        self.dim = dim
        store = {}
        for idx, v in (comps or {}).items():
            idx = tuple(idx)
            if len(idx) != degree or any(not 0 <= i < dim for i in idx):
                raise ValueError(f"bad component index {idx}")
            sign, key = _sort_sign(idx)
            v = normalize(as_expr(v))
            if sign == 0:
                if v != ZERO:
                    raise ValueError(f"component {idx} has a repeated index")
                continue
            v = v if sign == 1 else normalize(-v)
            if key in store and store[key] != v:
                raise ValueError(f"conflicting values for component {key}")
            if v != ZERO:
                store[key] = v
        self.comps = store

    @classmethod
    def scalar(cls, f: Expr, dim: int) -> "FormField":
        return cls(0, dim, {(): f})

    @classmethod
    def one_form(cls, comps: Sequence) -> "FormField":
        return cls(1, len(comps), {(i,): v for i, v in enumerate(comps)})

    @classmethod
    def two_form(cls, matrix: ExprMatrix | Sequence[Sequence]) -> "FormField":
        """From an antisymmetric matrix; only the upper triangle is read."""
        e = matrix.entries if isinstance(matrix, ExprMatrix) else matrix
        n = len(e)
        return cls(2, n, {(i, j): e[i][j] for i in range(n) for j in range(i + 1, n)})

    @classmethod
    def zero(cls, degree: int, dim: int) -> "FormField":
        return cls(degree, dim, {})

    def __getitem__(self, idx) -> Expr:
        if isinstance(idx, int):
            idx = (idx,)
        sign, key = _sort_sign(idx)
        if sign == 0:
            return ZERO
        v = self.comps.get(key, ZERO)
        return v if sign == 1 else normalize(-v)

    def keys(self) -> list[tuple[int, ...]]:
        return list(combinations(range(self.dim), self.degree))

    def values(self) -> list[Expr]:
        return [self.comps.get(k, ZERO) for k in self.keys()]

    def _check(self, other: "FormField") -> None:
        if (self.degree, self.dim) != (other.degree, other.dim):
            raise ValueError("forms of different degree or dimension")

    def __add__(self, other: "FormField") -> "FormField":
        self._check(other)
        return FormField(self.degree, self.dim, {k: self[k] + other[k] for k in self.keys()})

    def __sub__(self, other: "FormField") -> "FormField":
        self._check(other)
        return FormField(self.degree, self.dim, {k: self[k] - other[k] for k in self.keys()})

    def __neg__(self) -> "FormField":
        return FormField(self.degree, self.dim, {k: -v for k, v in self.comps.items()})

    def scale(self, f) -> "FormField":
        f = as_expr(f)
        return FormField(self.degree, self.dim, {k: f * v for k, v in self.comps.items()})

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, FormField)
            and (self.degree, self.dim) == (other.degree, other.dim)
            and self.comps == other.comps
        )

    def __hash__(self) -> int:
        return hash((self.degree, self.dim, tuple(sorted(self.comps.items()))))

    def is_zero(self) -> bool:
        return not self.comps

    def __repr__(self) -> str:
        body = ", ".join(f"{k}: {v}" for k, v in sorted(self.comps.items()))
        return f"FormField(deg={self.degree}, {{{body}}})"

    def to_json(self) -> dict:
        return {"".join(str(i + 1) for i in k): str(v) for k, v in sorted(self.comps.items())}


def exterior_derivative(w: FormField, chart) -> FormField:
    coords = coords_of(chart)
    if w.degree >= 3:
        raise ValueError("exterior derivative is implemented for degree <= 2")
    p = w.degree + 1
    comps = {}
    for idx in combinations(range(w.dim), p):
        terms = []
        for i, mu in enumerate(idx):
            rest = idx[:i] + idx[i + 1:]
            t = diff(w[rest], coords[mu])
            terms.append(t if i % 2 == 0 else -t)
        comps[idx] = total(terms)
    return FormField(p, w.dim, comps)


def interior_product(v: Sequence[Expr], w: FormField) -> FormField:
    if w.degree == 0:
        raise ValueError("interior product of a 0-form")
    comps = {}
    for idx in combinations(range(w.dim), w.degree - 1):
        comps[idx] = total(v[mu] * w[(mu,) + idx] for mu in range(w.dim) if v[mu] != ZERO)
    return FormField(w.degree - 1, w.dim, comps)


def wedge(a: FormField, b: FormField) -> FormField:
    p, q = a.degree, b.degree
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    if p + q > 3:
        raise ValueError("wedge result would exceed degree 3")
    comps = {}
    for idx in combinations(range(a.dim), p + q):
        terms = []
        for left in combinations(range(p + q), p):
            right = tuple(i for i in range(p + q) if i not in left)
            sign, _ = _sort_sign(left + right)
            t = a[tuple(idx[i] for i in left)] * b[tuple(idx[i] for i in right)]
            terms.append(t if sign == 1 else -t)
        comps[idx] = total(terms)
    return FormField(p + q, a.dim, comps)


def _lie_component(T, v, coords, idx) -> Expr:
    # v^l d_l T_idx + sum_i (d_{idx_i} v^l) T_{idx with slot i -> l}
    n = len(coords)
    terms = [directional(v, T(idx), coords)]
    for i, mu in enumerate(idx):
        for lam in range(n):
            if v[lam] == ZERO:
                continue
            dv = diff(v[lam], coords[mu])
            if dv == ZERO:
                continue
            terms.append(dv * T(idx[:i] + (lam,) + idx[i + 1:]))
    return total(terms)


def lie_derivative(T, v: Sequence[Expr], chart):
    """Lie derivative of a (0,2) tensor (ExprMatrix) or of a form, by the coordinate formula."""
    coords = coords_of(chart)
    if isinstance(T, ExprMatrix):
        n = T.rows
        return ExprMatrix(
            [[_lie_component(lambda ij: T[ij[0], ij[1]], v, coords, (i, j)) for j in range(n)] for i in range(n)]
        )
    if isinstance(T, FormField):
        return FormField(
            T.degree, T.dim, {idx: _lie_component(lambda ix: T[ix], v, coords, idx) for idx in T.keys()}
        )
    raise TypeError(f"cannot take the Lie derivative of {type(T).__name__}")


def form_residual(name: str, forms: Iterable[FormField], samples: SampleSpec | Samples) -> Residual:
    exprs = [v for f in forms for v in f.values()]
    return max_residual(exprs, samples, name)


# ------------------------------------------------------------------ lifted data

def lifted_metric(E: ExprMatrix, frame) -> ExprMatrix:
    rho = rho_of(frame)
    return rho.T @ E @ rho


def q_lie_derivative(Eb: ExprMatrix, frame, C: StructFun, a: int, chart) -> ExprMatrix:
    """(L_{e_a} Eb)_{dc} = rho_a(Eb_{dc}) - C^b_{ad} Eb_{bc} - C^b_{ac} Eb_{db}."""
    coords = coords_of(chart)
    rho = rho_of(frame)
    k = rho.cols
    va = rho.col(a)
    return ExprMatrix(
        [
            [
                directional(va, Eb[d, c], coords)
                - total(C.C[b][a][d] * Eb[b, c] for b in range(k))
                - total(C.C[b][a][c] * Eb[d, b] for b in range(k))
                for c in range(k)
            ]
            for d in range(k)
        ]
    )


def lifting_residual(E: ExprMatrix, frame, C: StructFun, chart, samples: SampleSpec | Samples) -> Residual:
    """q_lie_derivative(rho^T E rho) against rho^T (L_{rho_a} E) rho, over all a."""
    rho = rho_of(frame)
    Eb = lifted_metric(E, frame)
    exprs = []
    for a in range(rho.cols):
        lhs = q_lie_derivative(Eb, frame, C, a, chart)
        rhs = rho.T @ lie_derivative(E, rho.col(a), chart) @ rho
        exprs += [x - y for x, y in zip(lhs.flat(), rhs.flat())]
    return max_residual(exprs, samples, "lifting identity")


def lemma_identity_terms(E: ExprMatrix, frame, C: StructFun, chart) -> list[Expr]:
    """lhs - rhs of the identity expressing (L_{rho_a}E) rho through derivatives of rho^T E rho.

    Only an identity when rho^+ is also a right inverse (square invertible frames).
    """
    coords = coords_of(chart)
    rho = rho_of(frame)
    n, k = rho.rows, rho.cols
    rp = left_pinv(rho)
    Eb = lifted_metric(E, frame)
    out = []
    for a in range(k):
        va = rho.col(a)
        LE = lie_derivative(E, va, chart)
        dEb = [[directional(va, Eb[d, c], coords) for c in range(k)] for d in range(k)]
        for lam in range(n):
            for c in range(k):
                lhs = total(LE[lam, mu] * rho[mu, c] for mu in range(n))
                t1 = total(rp[d, lam] * dEb[d][c] for d in range(k))
                t2 = total(rp[e, lam] * C.C[d][a][e] * Eb[d, c] for d in range(k) for e in range(k))
                t3 = total(E[lam, mu] * C.C[d][a][c] * rho[mu, d] for d in range(k) for mu in range(n))
                out.append(lhs - (t1 - t2 - t3))
    return out
