import random

import numpy as np
import pytest
import sympy

from helpers import PLANE, random_case, random_qconn
from gaugekit.cartan import StructFun, lifted_metric, structure_functions
from gaugekit.closure import (
    INJECTIVE_NOTE,
    adjoint_connection,
    closure_obstruction,
    curvature_duality_check,
    curvature_q,
    curvature_tm,
    flat_table,
    invertible_solution,
    mc_form_check,
    table_residual,
    torsion_T,
)
from gaugekit.connections import ConnQ, ConnTM, maurer_cartan, pure_gauge
from gaugekit.exprkit import ZERO, diff, parse
from gaugekit.gauging import gauge_thm42, thm42_omega_minus
from gaugekit.geomodel import VectorFrame
from gaugekit.symlinalg import ExprMatrix, inverse
from gaugekit.verify import SampleSpec, sample_points

XY = ("x", "y")
XYZ = ("x", "y", "z")
TOL = 1e-9


def frame(name, *vectors, coords=XY):
    return VectorFrame.from_vectors(name, [[parse(c, coords) for c in v] for v in vectors])


def biggest(table, spec):
    return table_residual(table, spec, "t").max_abs


@pytest.fixture(scope="module")
def gauged(worked):
    fr = worked.frame("dx_dz")
    C = structure_functions(fr, worked.chart)
    return fr, C, gauge_thm42(worked.E, fr, C, worked.chart, worked.default_spec())


# the ax+b group frame: [d_x, e^x d_y] = e^x d_y, constant structure constants
AFFINE = frame("affine", ["1", "0"], ["0", "exp(x)"])
AFFINE_C = StructFun.from_entries(2, {(1, 0, 1): parse("1")})


# ------------------------------------------------------------------ torsion

def test_torsion_trivial():
    fr = frame("d", ["1", "0"], ["0", "1"])
    T = torsion_T(fr, ConnTM.zero("+", 2, 2), StructFun.zero(2))
    assert all(v == ZERO for v in flat_table(T))


@pytest.mark.parametrize("seed", range(3))
def test_torsion_of_explicit_minus_connection_is_c(seed):
    _, fr, C = random_case(seed)
    T = torsion_T(fr, thm42_omega_minus(fr, C), C)
    assert all(T[a][b][c] == C[a, b, c] for a in range(2) for b in range(2) for c in range(2))


def test_torsion_constant_hand_value():
    # rho = I, Omega^a_{mu b} = a + 2 mu + 3 b, C = 0:  T^a_bc = Omega^a_{bc} - Omega^a_{cb} = 3(c - b) - 2(c - b)
    fr = frame("d", ["1", "0"], ["0", "1"])
    omega = ConnTM.from_table("+", [[[str(a + 2 * mu + 3 * b) for b in range(2)] for mu in range(2)] for a in range(2)])
    T = torsion_T(fr, omega, StructFun.zero(2))
    for a in range(2):
        for b in range(2):
            for c in range(2):
                assert T[a][b][c] == parse(str(c - b))


# ------------------------------------------------------------------ TM curvature

def test_tm_curvature_zero():
    assert all(v == ZERO for v in flat_table(curvature_tm(ConnTM.zero("+", 2, 3), XYZ)))


def test_tm_curvature_worked_example_nonzero(gauged, worked):
    *_, rep = gauged
    R = curvature_tm(rep.omega_plus, worked.chart)
    r = table_residual(R, worked.default_spec(), "R+")
    assert r.max_abs > 1e-3 and r.witness is not None
    # only the b = 0 column and the (x, z) plane carry curvature
    for a in range(2):
        for mu in range(3):
            for nu in range(3):
                assert R[a][mu][nu][1] == ZERO
                if {mu, nu} != {0, 2}:
                    assert R[a][mu][nu][0] == ZERO


def test_tm_curvature_against_sympy(gauged, worked):
    *_, rep = gauged
    x = sympy.Symbol("x")
    D = 1 + 2 * x**2
    # the printed table, as [a][mu][b=0]; only mu = x, z are nonzero
    om = {(0, 0): x / D, (0, 2): (1 - x**2) / D, (1, 0): -1 / D, (1, 2): 3 * x / D}
    W = lambda a, mu: om.get((a, mu), 0)  # noqa: E731
    # R^a_{xz0} = d_x W^a_z - d_z W^a_x + W^a_{x c} W^c_{z 0} - W^a_{z c} W^c_{x 0}, c = 0 only
    ref = [sympy.simplify(sympy.diff(W(a, 2), x) + W(a, 0) * W(0, 2) - W(a, 2) * W(0, 0)) for a in range(2)]
    R = curvature_tm(rep.omega_plus, worked.chart)
    s = sample_points(worked.default_spec(count=40))
    for a in range(2):
        f = sympy.lambdify(x, ref[a], "numpy")
        ours = ExprMatrix([[R[a][0][2][0]]]).evaluate(s)[:, 0, 0]
        assert np.allclose(ours, f(s.points[:, 0]), atol=1e-12)


@pytest.mark.parametrize("K", [[["1", "x"], ["y", "2"]], [["2+x*y", "y"], ["x", "1+y^2"]], [["exp(x)", "0"], ["y", "1"]]])
def test_tm_curvature_of_pure_gauge_vanishes(K):
    K = ExprMatrix.from_text(K, XY)
    omega = pure_gauge(K, PLANE)
    assert omega[0, 0, 1] == (inverse(K) @ K.map(lambda e: diff(e, "x")))[0, 1]
    assert biggest(curvature_tm(omega, PLANE), PLANE.cube(lo=0.2, hi=0.9)) <= TOL


# ------------------------------------------------------------------ adjoint connection

@pytest.mark.parametrize("seed", range(3))
def test_adjoint_of_explicit_minus_connection_vanishes(seed):
    _, fr, C = random_case(seed)
    assert adjoint_connection(fr, thm42_omega_minus(fr, C), C).is_zero()


def test_adjoint_of_zero_is_c():
    Q = adjoint_connection(AFFINE, ConnTM.zero("+", 2, 2), AFFINE_C)
    assert Q.omega == AFFINE_C.C


def test_adjoint_worked_example(gauged, worked):
    fr, C, rep = gauged
    Q = adjoint_connection(fr, rep.omega_plus, C)
    Eb = rep.lifted_metric
    assert Q.direction(0) == inverse(Eb) @ Eb.map(lambda e: diff(e, "x"))
    assert Q.direction(1) == ExprMatrix.zeros(2, 2)
    assert adjoint_connection(fr, rep.omega_minus, C).is_zero()


# ------------------------------------------------------------------ Q curvature

def test_q_curvature_zero_connection_constant_c():
    assert all(v == ZERO for v in flat_table(curvature_q(ConnQ.zero("+", 2), AFFINE, AFFINE_C, PLANE)))


def test_q_curvature_worked_example(gauged, worked):
    fr, C, rep = gauged
    spec = worked.default_spec()
    for q in (rep.q_plus, rep.q_minus):
        assert biggest(curvature_q(q, fr, C, worked.chart), spec) <= TOL


def test_q_curvature_detects_non_pure_gauge():
    q = random_qconn(random.Random(3))
    r = table_residual(curvature_q(q, AFFINE, AFFINE_C, PLANE), PLANE.cube(), "RQ")
    assert r.max_abs > 1e-3 and r.witness is not None


@pytest.mark.parametrize("seed", range(4))
def test_pure_gauge_flatness(seed):
    rng = random.Random(100 + seed)
    _, fr, C = random_case(seed)
    entries = [[f"{3 if i == j else 0}+({rng.choice([-1, 1])})*x*y+({rng.choice([-1, 0, 1])})*y" for j in range(2)]
               for i in range(2)]
    K = ExprMatrix.from_text(entries, XY)
    q = maurer_cartan(K, fr, PLANE)
    spec = PLANE.cube()
    assert biggest(curvature_q(q, fr, C, PLANE), spec) <= TOL
    assert mc_form_check(q, fr, K, PLANE, spec).max_abs <= TOL


# ------------------------------------------------------------------ Maurer-Cartan forms

def test_mc_identity():
    fr = frame("d", ["1", "0"], ["0", "1"])
    assert mc_form_check(ConnQ.zero("+", 2), fr, ExprMatrix.identity(2), PLANE, PLANE.cube()).max_abs == 0


def test_mc_lifted_metric(gauged, worked):
    fr, _, rep = gauged
    assert mc_form_check(rep.q_plus, fr, rep.lifted_metric, worked.chart, worked.default_spec()).max_abs <= TOL


def test_mc_mismatch():
    fr = frame("d", ["1", "0"], ["0", "1"])
    K = ExprMatrix.from_text([["2", "x"], ["y", "3"]], XY)
    q = random_qconn(random.Random(5), sign="+")
    assert mc_form_check(q, fr, K, PLANE, PLANE.cube()).max_abs > 1e-3


# ------------------------------------------------------------------ closure obstruction

def test_obstruction_lie_group():
    O = closure_obstruction(AFFINE, ConnTM.zero("+", 2, 2), AFFINE_C, PLANE)
    assert all(v == ZERO for v in O.flat())


def test_obstruction_worked_example(gauged, worked):
    fr, C, rep = gauged
    for omega in (rep.omega_plus, rep.omega_minus):
        assert closure_obstruction(fr, omega, C, worked.chart).residual(worked.default_spec()).max_abs <= TOL


def test_obstruction_antisymmetric(gauged, worked):
    fr, C, rep = gauged
    O = closure_obstruction(fr, rep.omega_plus, C, worked.chart).table
    assert all(O[a][mu][b][c] == -O[a][mu][c][b] for a in range(2) for mu in range(3) for b in range(2) for c in range(2))


def _bumped(omega: ConnTM, bump: str, coords) -> ConnTM:
    table = [[list(row) for row in plane] for plane in omega.omega]
    table[0][0][1] = table[0][0][1] + parse(bump, coords)
    return ConnTM(omega.sign, tuple(tuple(tuple(r) for r in plane) for plane in table))


def test_obstruction_detects_nonflat(gauged, worked):
    fr, C, rep = gauged
    bad = _bumped(rep.omega_plus, "x*z", XYZ)
    assert closure_obstruction(fr, bad, C, worked.chart).residual(worked.default_spec()).max_abs > 1e-3


def _equivalent(fr, omega, C, chart, spec) -> tuple[bool, bool]:
    q_flat = biggest(curvature_q(adjoint_connection(fr, omega, C), fr, C, chart), spec) <= TOL
    closed = closure_obstruction(fr, omega, C, chart).residual(spec).max_abs <= TOL
    return q_flat, closed


def test_flatness_equivalence(gauged, worked):
    fr, C, rep = gauged
    spec = worked.default_spec()
    assert _equivalent(fr, rep.omega_plus, C, worked.chart, spec) == (True, True)
    assert _equivalent(fr, rep.omega_minus, C, worked.chart, spec) == (True, True)
    assert _equivalent(fr, _bumped(rep.omega_plus, "x*z", XYZ), C, worked.chart, spec) == (False, False)
    assert _equivalent(AFFINE, ConnTM.zero("+", 2, 2), AFFINE_C, PLANE, PLANE.cube()) == (True, True)
    assert _equivalent(AFFINE, _bumped(ConnTM.zero("+", 2, 2), "y", XY), AFFINE_C, PLANE, PLANE.cube()) == (False, False)


def test_rank_deficient_anchor_carries_note():
    fr = frame("f", ["1", "0"], ["2", "0"])
    O = closure_obstruction(fr, ConnTM.zero("+", 2, 2), StructFun.zero(2), PLANE)
    assert not O.injective
    assert O.residual(PLANE.cube()).detail == {"note": INJECTIVE_NOTE}
    assert closure_obstruction(AFFINE, ConnTM.zero("+", 2, 2), AFFINE_C, PLANE).injective


def test_obstruction_json(gauged, worked):
    fr, C, rep = gauged
    doc = closure_obstruction(fr, rep.omega_plus, C, worked.chart).to_json()
    assert doc["index_order"] == "[a][mu][b][c]" and doc["sign"] == "+"


# ------------------------------------------------------------------ invertible solution and duality

def test_invertible_solution_zero_minus(gauged, worked):
    fr, _, rep = gauged
    qp = invertible_solution(rep.lifted_metric, fr, ConnQ.zero("-", 2), worked.chart)
    assert qp == maurer_cartan(rep.lifted_metric, fr, worked.chart)


def test_duality_flat(gauged, worked):
    fr, C, rep = gauged
    assert curvature_duality_check(rep.lifted_metric, fr, C, rep.q_minus, worked.chart, worked.default_spec()).max_abs <= TOL


def test_duality_flat_random():
    E, fr, C = random_case(1)
    Eb = lifted_metric(E, fr)
    K = ExprMatrix.from_text([["2", "x"], ["y", "2"]], XY)
    q = maurer_cartan(K, fr, PLANE, "-")
    assert curvature_duality_check(Eb, fr, C, q, PLANE, PLANE.cube()).max_abs <= TOL


@pytest.mark.parametrize("seed", range(6))
def test_duality_nonflat(seed):
    E, fr, C = random_case(seed)
    Eb = lifted_metric(E, fr)
    q = random_qconn(random.Random(1000 + seed))
    spec = PLANE.cube()
    nonflat = table_residual(curvature_q(q, fr, C, PLANE, exact=False), spec, "R-")
    assert nonflat.max_abs > 1e-3
    assert curvature_duality_check(Eb, fr, C, q, PLANE, spec).max_abs <= TOL


def test_duality_detects_wrong_structure_functions():
    E, fr, C = random_case(0)
    q = random_qconn(random.Random(1000))
    r = curvature_duality_check(lifted_metric(E, fr), fr, StructFun.zero(2), q, PLANE, PLANE.cube())
    assert r.max_abs > 1e-3


def test_duality_spec_is_respected():
    E, fr, C = random_case(2)
    spec = SampleSpec.cube(XY, count=37, seed=9)
    r = curvature_duality_check(lifted_metric(E, fr), fr, C, random_qconn(random.Random(2)), PLANE, spec)
    assert r.samples_used == 37
