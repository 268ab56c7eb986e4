"""Deciding gaugeability and constructing the gauging connections.

Two constructions are offered. The explicit one needs a linearly independent
frame and builds Omega- from the structure functions, then Omega+ from the
pseudo-inverse of E rho. The degenerate one works for any involutive frame:
it brings the lifted metric rho^T E rho to block form by a frame change N,
writes both Q-connections as Maurer-Cartan forms, and recovers the TM
connections from them.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product
from typing import Sequence

import numpy as np

from .cartan import StructFun, coords_of, directional, lie_derivative, lifted_metric, rho_of
from .closure import (
    adjoint_connection,
    closure_obstruction,
    curvature_q,
    flat_table,
    lifted_killing_exprs,
    mc_form_check,
)
from .connections import ConnQ, ConnTM, maurer_cartan
from .exprkit import ONE, ZERO, Const, Expr, ZeroVerdict, diff, is_normal_zero, is_zero, normalize, to_text, total
from .symlinalg import (
    ExprMatrix,
    RankDeficientError,
    RankProfile,
    det,
    inverse,
    left_pinv,
    numeric_pinv,
    numeric_rank,
)
from .verify import Residual, SampleSpec, Samples, max_residual, residual_from_values, sample_points

GAUGEABLE = "gaugeable"
NOT_GAUGEABLE = "not-gaugeable"
INCONCLUSIVE = "inconclusive"
BY_CONSTRUCTION = "not gaugeable by this construction"


class ConsistencyError(ValueError):
    def __init__(self, residual: Residual):
        super().__init__(
            f"consistency condition fails: residual {residual.max_abs:.3g} at {dict(residual.witness or {})}"
        )
        self.residual = residual
        self.witness = residual.witness


class FrameReductionError(ValueError):
    pass


class RescaleError(ValueError):
    pass


# ------------------------------------------------------------------ helpers

def _samples(spec: SampleSpec | Samples) -> Samples:
    return spec if isinstance(spec, Samples) else sample_points(spec)


def _tol(spec: SampleSpec | Samples, tol: float | None) -> float:
    if tol is not None:
        return tol
    return spec.tol if isinstance(spec, SampleSpec) else 1e-9


def _checked(name: str, exprs: Sequence[Expr], samples: Samples) -> Residual:
    """Sampled residual, marked symbolic when every expression normalizes to zero."""
    res = max_residual(exprs, samples, name)
    if all(is_normal_zero(e) for e in exprs):
        return Residual(name, res.max_abs, res.witness, res.samples_used, res.samples_skipped, "symbolic")
    return res


def _lie_tables(E: ExprMatrix, frame, chart) -> list[ExprMatrix]:
    rho = rho_of(frame)
    return [lie_derivative(E, rho.col(a), chart) for a in range(rho.cols)]


def _as_table(X, k: int, n: int) -> list[ExprMatrix]:
    out = []
    for Xa in X:
        Xa = Xa if isinstance(Xa, ExprMatrix) else ExprMatrix(Xa)
        if Xa.shape != (k, n):
            raise ValueError(f"free term X_a must be {k}x{n}, got {Xa.shape}")
        out.append(Xa)
    return out


# ------------------------------------------------------------------ Killing equation

def killing_exprs(E: ExprMatrix, frame, plus: ConnTM, minus: ConnTM, chart) -> list[Expr]:
    """(L_a E)_{mu nu} - E_{mu l} rho^l_b Omega+^b_{nu a} - E_{l nu} rho^l_b Omega-^b_{mu a}."""
    rho = rho_of(frame)
    n, k = rho.rows, rho.cols
    Er = E @ rho
    Etr = E.T @ rho
    Wp, Wm = plus.omega, minus.omega
    out = []
    for a, LE in enumerate(_lie_tables(E, frame, chart)):
        for mu in range(n):
            for nu in range(n):
                out.append(
                    LE[mu, nu]
                    - total(Er[mu, b] * Wp[b][nu][a] for b in range(k))
                    - total(Etr[nu, b] * Wm[b][mu][a] for b in range(k))
                )
    return out


def _killing_values(E, frame, plus: ConnTM, minus: ConnTM, chart, samples: Samples) -> np.ndarray:
    rho = rho_of(frame)
    LE = np.stack([L.evaluate(samples) for L in _lie_tables(E, frame, chart)], axis=1)  # m,a,mu,nu
    Ev = E.evaluate(samples)
    R = rho.evaluate(samples)
    Wp = plus.evaluate(samples)
    Wm = minus.evaluate(samples)
    t1 = np.einsum("mil,mlb,mbva->maiv", Ev, R, Wp)
    t2 = np.einsum("mlv,mlb,mbia->maiv", Ev, R, Wm)
    return LE - t1 - t2


def killing_residual(
    E: ExprMatrix, frame, plus: ConnTM, minus: ConnTM, chart, spec: SampleSpec | Samples
) -> Residual:
    samples = _samples(spec)
    if plus.symbolic and minus.symbolic:
        return _checked("killing", killing_exprs(E, frame, plus, minus, chart), samples)
    return residual_from_values("killing", _killing_values(E, frame, plus, minus, chart, samples), samples)


# ------------------------------------------------------------------ consistency and Omega+

@dataclass(frozen=True)
class Consistency:
    holds: bool
    residual: Residual
    path: str  # "symbolic" or "numeric"
    projector: ExprMatrix | None = None

    def to_dict(self) -> dict:
        out = {"holds": self.holds, "path": self.path, "residual": self.residual.to_dict()}
        if self.projector is not None:
            out["projector"] = self.projector.to_text()
        return out


def _psi_symbolic(E: ExprMatrix, frame, minus: ConnTM, chart) -> list[ExprMatrix]:
    """Psi_a = L_a E - W_a with (W_a)_{mu nu} = E_{l nu} rho^l_b Omega-^b_{mu a}."""
    rho = rho_of(frame)
    n, k = rho.rows, rho.cols
    Etr = E.T @ rho
    Wm = minus.omega
    return [
        ExprMatrix(
            [[LE[mu, nu] - total(Etr[nu, b] * Wm[b][mu][a] for b in range(k)) for nu in range(n)] for mu in range(n)]
        )
        for a, LE in enumerate(_lie_tables(E, frame, chart))
    ]


def _psi_values(E: ExprMatrix, frame, minus: ConnTM, chart, samples: Samples) -> np.ndarray:
    rho = rho_of(frame)
    LE = np.stack([L.evaluate(samples) for L in _lie_tables(E, frame, chart)], axis=1)
    W = np.einsum("mlv,mlb,mbia->maiv", E.evaluate(samples), rho.evaluate(samples), minus.evaluate(samples))
    return LE - W


def _symbolic_pinv(M: ExprMatrix, spec) -> ExprMatrix | None:
    try:
        return left_pinv(M, spec if isinstance(spec, SampleSpec) else None)
    except RankDeficientError:
        return None


def consistency_thm41(
    E: ExprMatrix, frame, minus: ConnTM, chart, spec: SampleSpec | Samples, tol: float | None = None
) -> Consistency:
    """Residual of Psi_a = E rho (E rho)^+ Psi_a over every a."""
    tol = _tol(spec, tol)
    samples = _samples(spec)
    Er = E @ rho_of(frame)
    pinv = _symbolic_pinv(Er, spec) if minus.symbolic else None
    if pinv is not None:
        proj = Er @ pinv
        exprs = []
        for psi in _psi_symbolic(E, frame, minus, chart):
            exprs += (psi - proj @ psi).flat()
        res = _checked("consistency", exprs, samples)
        return Consistency(res.ok(tol), res, "symbolic", proj)
    psi = _psi_values(E, frame, minus, chart, samples)
    A = Er.evaluate(samples)
    proj = A @ numeric_pinv(A)
    res = residual_from_values("consistency", psi - np.einsum("mij,majk->maik", proj, psi), samples)
    return Consistency(res.ok(tol), res, "numeric")


def solve_omega_plus(
    E: ExprMatrix,
    frame,
    minus: ConnTM,
    chart,
    spec: SampleSpec | Samples,
    X: Sequence | None = None,
    tol: float | None = None,
    consistency: Consistency | None = None,
) -> ConnTM:
    """Omega+_a = (E rho)^+ Psi_a + (I - (E rho)^+ E rho) X_a, after checking consistency."""
    cons = consistency or consistency_thm41(E, frame, minus, chart, spec, tol)
    if not cons.holds:
        raise ConsistencyError(cons.residual)
    rho = rho_of(frame)
    n, k = rho.rows, rho.cols
    Er = E @ rho
    Xs = _as_table(X, k, n) if X is not None else None
    samples = _samples(spec)

    if cons.path == "symbolic":
        pinv = left_pinv(Er, spec if isinstance(spec, SampleSpec) else None)
        cols = []
        free = ExprMatrix.identity(k) - pinv @ Er if Xs is not None else None
        for a, psi in enumerate(_psi_symbolic(E, frame, minus, chart)):
            sol = pinv @ psi
            if free is not None:
                sol = sol + free @ Xs[a]
            cols.append(sol)
        return ConnTM("+", tuple(tuple(tuple(cols[a][b, nu] for a in range(k)) for nu in range(n)) for b in range(k)))

    psi = _psi_values(E, frame, minus, chart, samples)  # m,a,mu,nu
    A = Er.evaluate(samples)
    P = numeric_pinv(A)  # m,k,n
    sol = np.einsum("mbi,maiv->mabv", P, psi)
    if Xs is not None:
        free = np.eye(k) - P @ A
        Xv = np.stack([x.evaluate(samples) for x in Xs], axis=1)  # m,a,b,nu
        sol = sol + np.einsum("mbc,macv->mabv", free, Xv)
    return ConnTM("+", values=np.transpose(sol, (0, 2, 3, 1)), samples=samples)


# ------------------------------------------------------------------ reports

@dataclass(frozen=True)
class Check:
    residual: Residual
    gating: bool = True

    def passed(self, tol: float) -> bool:
        return self.residual.ok(tol)

    def to_dict(self, tol: float) -> dict:
        return {**self.residual.to_dict(), "gating": self.gating, "passed": self.passed(tol)}


@dataclass(frozen=True)
class FrameReduction:
    N: ExprMatrix
    E_block: ExprMatrix  # j x j
    X_block: ExprMatrix | None  # j x (k - j), None when j = k
    j: int
    profile: RankProfile | None = None

    @property
    def k(self) -> int:
        return self.N.rows

    def K(self) -> ExprMatrix:
        """[[E', X'], [0, I]]."""
        k, j = self.k, self.j

        def entry(r, c):
            if r < j:
                return self.E_block[r, c] if c < j else self.X_block[r, c - j]
            return ONE if r == c else ZERO

        return ExprMatrix.from_function(k, k, entry)

    def to_dict(self) -> dict:
        return {
            "N": self.N.to_text(),
            "j": self.j,
            "E_block": self.E_block.to_text(),
            "X_block": self.X_block.to_text() if self.X_block is not None else [],
            **({"rank_profile": self.profile.to_dict()} if self.profile is not None else {}),
        }


@dataclass
class GaugingReport:
    construction: str  # "explicit" or "degenerate"
    frame: str
    verdict: str
    reason: str | None
    tol: float
    lifted_metric: ExprMatrix
    det_lifted: Expr | None = None
    det_verdict: ZeroVerdict | None = None
    consistency: Consistency | None = None
    omega_plus: ConnTM | None = None
    omega_minus: ConnTM | None = None
    q_plus: ConnQ | None = None
    q_minus: ConnQ | None = None
    checks: list[Check] = field(default_factory=list)
    reduction: FrameReduction | None = None

    @property
    def gaugeable(self) -> bool:
        return self.verdict == GAUGEABLE

    def check(self, name: str) -> Residual:
        for c in self.checks:
            if c.residual.name == name:
                return c.residual
        raise KeyError(name)

    def to_dict(self) -> dict:
        conns = {}
        for key in ("omega_plus", "omega_minus", "q_plus", "q_minus"):
            v = getattr(self, key)
            if v is not None:
                conns[key] = v.to_json()
        return {
            "construction": self.construction,
            "frame": self.frame,
            "verdict": self.verdict,
            "reason": self.reason,
            "lifted_metric": self.lifted_metric.to_text(),
            "det_lifted": to_text(self.det_lifted) if self.det_lifted is not None else None,
            "det_verdict": self.det_verdict.to_dict() if self.det_verdict is not None else None,
            "consistency": self.consistency.to_dict() if self.consistency is not None else None,
            "connections": conns,
            "checks": [c.to_dict(self.tol) for c in self.checks],
            **({"reduction": self.reduction.to_dict()} if self.reduction is not None else {}),
        }


def _frame_name(frame) -> str:
    return getattr(frame, "name", "frame")


def _finish(report: GaugingReport, failure_prefix: str = "") -> GaugingReport:
    failed = [c.residual.name for c in report.checks if c.gating and not c.passed(report.tol)]
    if failed:
        report.verdict = NOT_GAUGEABLE
        report.reason = failure_prefix + "failed checks: " + ", ".join(failed)
    else:
        report.verdict = GAUGEABLE
        report.reason = None
    return report


def _q_checks(report: GaugingReport, frame, C: StructFun, chart, samples: Samples) -> None:
    for sign, q in (("+", report.q_plus), ("-", report.q_minus)):
        R = curvature_q(q, frame, C, chart)
        report.checks.append(Check(_checked_table(f"Q-curvature ({sign})", R, samples)))


def _checked_table(name: str, table, samples: Samples) -> Residual:
    return _checked(name, flat_table(table), samples)


def _obstruction_checks(report: GaugingReport, frame, C: StructFun, chart, samples: Samples) -> None:
    for conn in (report.omega_plus, report.omega_minus):
        if conn is None or not conn.symbolic:
            continue
        O = closure_obstruction(frame, conn, C, chart)
        report.checks.append(Check(O.residual(samples), gating=False))


# ------------------------------------------------------------------ explicit construction

def thm42_omega_minus(frame, C: StructFun, spec=None) -> ConnTM:
    """Omega-^a_{mu b} = -(rho^+)^c_mu C^a_{bc}."""
    rho = rho_of(frame)
    n, k = rho.rows, rho.cols
    rp = left_pinv(rho, spec)
    return ConnTM(
        "-",
        tuple(
            tuple(
                tuple(normalize(-total(rp[c, mu] * C.C[a][b][c] for c in range(k))) for b in range(k))
                for mu in range(n)
            )
            for a in range(k)
        ),
    )


def gauge_thm42(
    E: ExprMatrix,
    frame,
    C: StructFun,
    chart,
    spec: SampleSpec,
    tol: float | None = None,
    obstructions: bool = True,
) -> GaugingReport:
    """Explicit construction for a linearly independent frame."""
    tol = _tol(spec, tol)
    samples = _samples(spec)
    Eb = lifted_metric(E, frame)
    report = GaugingReport("explicit", _frame_name(frame), INCONCLUSIVE, None, tol, Eb)
    try:
        minus = thm42_omega_minus(frame, C, spec)
    except RankDeficientError:
        report.verdict = NOT_GAUGEABLE
        report.reason = "frame is not linearly independent; the explicit construction does not apply"
        return report
    report.omega_minus = minus
    report.det_lifted = det(Eb)
    report.det_verdict = is_zero(report.det_lifted, spec)
    cons = consistency_thm41(E, frame, minus, chart, samples, tol)
    report.consistency = cons
    report.checks.append(Check(cons.residual))
    if report.det_verdict.zero:
        report.verdict = NOT_GAUGEABLE
        report.reason = "lifted metric rho^T E rho is singular"
        return report
    if not report.det_verdict.nonzero:
        report.reason = "could not decide whether the lifted metric is invertible"
        return report
    if not cons.holds:
        report.verdict = NOT_GAUGEABLE
        report.reason = "consistency condition fails"
        return report

    plus = solve_omega_plus(E, frame, minus, chart, samples, tol=tol, consistency=cons)
    report.omega_plus = plus
    report.checks.append(Check(killing_residual(E, frame, plus, minus, chart, samples)))
    if not plus.symbolic:
        report.reason = "symbolic pseudo-inverse unavailable; Q-connections not formed"
        return report
    report.q_minus = adjoint_connection(frame, minus, C)
    report.q_plus = adjoint_connection(frame, plus, C)
    _q_checks(report, frame, C, chart, samples)
    mc = mc_form_check(report.q_plus, frame, Eb, chart, samples)
    report.checks.append(Check(mc.renamed("maurer-cartan form (+) against rho^T E rho"), gating=False))
    if obstructions:
        _obstruction_checks(report, frame, C, chart, samples)
    return _finish(report)


# ------------------------------------------------------------------ frame reduction

def _rref(M: ExprMatrix, spec) -> tuple[list[list[Expr]], list[int]]:
    """Reduced row echelon form; pivot = lowest-index row whose entry tests nonzero."""
    a = [list(r) for r in M.entries]
    rows, cols = M.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        p = next((i for i in range(r, rows) if a[i][c] != ZERO and is_zero(a[i][c], spec).nonzero), None)
        if p is None:
            for i in range(r, rows):
                a[i][c] = ZERO
            continue
        a[r], a[p] = a[p], a[r]
        piv = a[r][c]
        a[r] = [normalize(v / piv) for v in a[r]]
        for i in range(rows):
            if i != r and a[i][c] != ZERO:
                f = a[i][c]
                a[i] = [normalize(v - f * w) for v, w in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
    return a, pivots


def _complements(k: int, pivots: Sequence[int], j: int):
    yield from combinations(pivots, j)
    yield from (s for s in combinations(range(k), j) if tuple(s) not in set(combinations(pivots, j)))


def frame_reduction(Eb: ExprMatrix, spec: SampleSpec, rank_hint: int | None = None) -> FrameReduction:
    """Frame change N with N^T Eb N = [[E', X'], [0, 0]] and E' invertible."""
    k = Eb.rows
    profile = None
    if rank_hint is None:
        profile = numeric_rank(Eb, spec)
        if not profile.constant:
            raise FrameReductionError(
                f"rank of the lifted metric is not constant on the box {profile.to_dict()['counts']}: restrict chart"
            )
        j = profile.max
    else:
        j = rank_hint
    if not 0 < j <= k:
        raise FrameReductionError(f"rank {j} out of range for a {k}x{k} lifted metric")
    if j == k:
        return FrameReduction(ExprMatrix.identity(k), Eb, None, k, profile)

    red, pivots = _rref(Eb.T, spec)
    if len(pivots) != j:
        raise FrameReductionError(f"pivot search found rank {len(pivots)}, expected {j}")
    free = [c for c in range(k) if c not in pivots]
    nulls = []
    for f in free:
        v = [ZERO] * k
        v[f] = ONE
        for row, pc in enumerate(pivots):
            v[pc] = normalize(-red[row][f])
        nulls.append(v)

    def attempt(A_cols: list[list[Expr]]) -> FrameReduction | None:
        N = ExprMatrix([[col[i] for col in A_cols + nulls] for i in range(k)])
        if not is_zero(det(N), spec).nonzero:
            return None
        T = N.T @ Eb @ N
        Ep = T.submatrix(range(j), range(j))
        if not is_zero(det(Ep), spec).nonzero:
            return None
        bottom = [T[r, c] for r in range(j, k) for c in range(k)]
        if max_residual(bottom, spec, "block form").max_abs > spec.tol:
            return None
        return FrameReduction(N, Ep, T.submatrix(range(j), range(j, k)), j, profile)

    def unit(i: int) -> list[Expr]:
        return [ONE if r == i else ZERO for r in range(k)]

    for subset in _complements(k, pivots, j):
        out = attempt([unit(i) for i in subset])
        if out is not None:
            return out
    for coeffs in product((1, -1, 2), repeat=j * k):
        cols = [[Const(Fraction(coeffs[c * k + r])) for r in range(k)] for c in range(j)]
        out = attempt(cols)
        if out is not None:
            return out
    raise FrameReductionError("no complement found making the reduced block invertible")


# ------------------------------------------------------------------ degenerate construction

def omega_from_adjoint(frame, q: ConnQ, C: StructFun, spec: SampleSpec | Samples) -> tuple[ConnTM, Residual]:
    """Minimal-norm Omega with rho^mu_c Omega^a_{mu b} = QOmega^a_{bc} - C^a_{bc}, and its solvability residual."""
    rho = rho_of(frame)
    n, k = rho.rows, rho.cols
    samples = _samples(spec)
    rhs = [[[normalize(q.omega[a][b][c] - C.C[a][b][c]) for c in range(k)] for b in range(k)] for a in range(k)]
    rp = _symbolic_pinv(rho, spec)
    if rp is not None:
        conn = ConnTM(
            q.sign,
            tuple(
                tuple(tuple(normalize(total(rp[c, mu] * rhs[a][b][c] for c in range(k))) for b in range(k))
                      for mu in range(n))
                for a in range(k)
            ),
        )
        exprs = [
            total(rho[mu, c] * conn.omega[a][mu][b] for mu in range(n)) - rhs[a][b][c]
            for a in range(k) for b in range(k) for c in range(k)
        ]
        return conn, _checked(f"anchor compatibility ({q.sign})", exprs, samples)
    R = rho.evaluate(samples)
    P = numeric_pinv(R)  # m,k,n
    r = np.stack(
        [ExprMatrix([[rhs[a][b][c] for c in range(k)] for b in range(k)]).evaluate(samples) for a in range(k)],
        axis=1,
    )  # m,a,b,c
    vals = np.einsum("mcu,mabc->maub", P, r)
    back = np.einsum("muc,maub->mabc", R, vals)
    res = residual_from_values(f"anchor compatibility ({q.sign})", back - r, samples)
    return ConnTM(q.sign, values=vals, samples=samples), res


def gauge_thm43(
    E: ExprMatrix,
    frame,
    C: StructFun,
    chart,
    spec: SampleSpec,
    rank_hint: int | None = None,
    tol: float | None = None,
    obstructions: bool = True,
) -> GaugingReport:
    """Construction for arbitrary involutive frames via the block-reduced lifted metric."""
    tol = _tol(spec, tol)
    samples = _samples(spec)
    Eb = lifted_metric(E, frame)
    report = GaugingReport("degenerate", _frame_name(frame), INCONCLUSIVE, None, tol, Eb)
    red = frame_reduction(Eb, spec, rank_hint)
    report.reduction = red
    report.det_lifted = det(red.E_block)
    report.det_verdict = is_zero(report.det_lifted, spec)

    Ninv = inverse(red.N, spec)
    report.q_minus = maurer_cartan(Ninv, frame, chart, "-", spec)
    report.q_plus = maurer_cartan(red.K() @ Ninv, frame, chart, "+", spec)

    minus, compat = omega_from_adjoint(frame, report.q_minus, C, samples)
    report.omega_minus = minus
    report.checks.append(Check(compat))
    cons = consistency_thm41(E, frame, minus, chart, samples, tol)
    report.consistency = cons
    report.checks.append(Check(cons.residual))
    if not compat.ok(tol) or not cons.holds:
        report.verdict = NOT_GAUGEABLE
        report.reason = f"{BY_CONSTRUCTION}: " + ("anchor compatibility fails" if not compat.ok(tol)
                                                    else "consistency condition fails")
        return report

    plus = solve_omega_plus(E, frame, minus, chart, samples, tol=tol, consistency=cons)
    report.omega_plus = plus
    report.checks.append(Check(killing_residual(E, frame, plus, minus, chart, samples)))
    lifted = lifted_killing_exprs(Eb, frame, report.q_plus, report.q_minus, chart)
    report.checks.append(Check(_checked("lifted killing", lifted, samples)))
    _q_checks(report, frame, C, chart, samples)
    if plus.symbolic:
        adj = adjoint_connection(frame, plus, C)
        diff_exprs = [x - y for x, y in zip(adj.flat(), report.q_plus.flat())]
        report.checks.append(Check(_checked("adjoint match (+)", diff_exprs, samples), gating=False))
        if obstructions:
            _obstruction_checks(report, frame, C, chart, samples)
    return _finish(report, f"{BY_CONSTRUCTION}: ")


def decide_gauging(E: ExprMatrix, frame, C: StructFun, chart, spec: SampleSpec, **kw) -> GaugingReport:
    """Explicit construction when it applies, the block-reduced construction otherwise."""
    if _symbolic_pinv(rho_of(frame), spec) is not None:
        report = gauge_thm42(E, frame, C, chart, spec, **{k: v for k, v in kw.items() if k != "rank_hint"})
        if report.det_verdict is None or not report.det_verdict.zero:
            return report
    # dependent frame, or independent with a degenerate lifted metric
    return gauge_thm43(E, frame, C, chart, spec, **kw)


# ------------------------------------------------------------------ rescaling

@dataclass(frozen=True)
class Rescaled:
    frame: object
    omega_plus: ConnTM
    omega_minus: ConnTM
    C: StructFun | None


def rescale(frame, plus: ConnTM, minus: ConnTM, f: Expr, chart, spec: SampleSpec | Samples,
            C: StructFun | None = None) -> Rescaled:
    """rho' = f rho, Omega'^b_{mu a} = Omega^b_{mu a} + delta^b_a d_mu f / f; f must stay positive."""
    samples = _samples(spec)
    fv = ExprMatrix([[f]]).evaluate(samples)[:, 0, 0]
    if np.isnan(fv).any() or (fv <= 0).any():
        raise RescaleError(
            "scale factor vanishes or turns negative on the sampled box; "
            "the rescaled connections would be unbounded there"
        )
    coords = coords_of(chart)
    f = normalize(f)
    shift = [normalize(diff(f, c) / f) for c in coords]
    if not (plus.symbolic and minus.symbolic):
        raise ValueError("rescaling needs symbolic connection tables")

    def shifted(conn: ConnTM) -> ConnTM:
        k, n = conn.k, conn.n
        return ConnTM(
            conn.sign,
            tuple(
                tuple(
                    tuple(normalize(conn.omega[b][mu][a] + shift[mu]) if a == b else conn.omega[b][mu][a]
                          for a in range(k))
                    for mu in range(n)
                )
                for b in range(k)
            ),
        )

    rho = rho_of(frame)
    new_frame = frame.scaled(f) if hasattr(frame, "scaled") else rho.scale(f)
    newC = None
    if C is not None:
        k = rho.cols
        df = [normalize(directional(rho.col(a), f, coords)) for a in range(k)]
        # [f r_a, f r_b] = f^2 C^c_ab r_c + f r_a(f) r_b - f r_b(f) r_a
        newC = StructFun.from_table(
            [[[f * C.C[c][a][b] + (df[a] if c == b else ZERO) - (df[b] if c == a else ZERO) for b in range(k)]
              for a in range(k)] for c in range(k)]
        )
    return Rescaled(new_frame, shifted(plus), shifted(minus), newC)
