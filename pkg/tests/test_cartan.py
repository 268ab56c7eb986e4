import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import PLANE, random_case
from gaugekit.cartan import (
    FormField,
    NonInvolutiveError,
    StructFun,
    StructureFunctionsRequired,
    exterior_derivative,
    interior_product,
    lemma_identity_terms,
    lie_bracket,
    lie_derivative,
    lifted_metric,
    lifting_residual,
    q_lie_derivative,
    structure_functions,
    wedge,
)
from gaugekit.exprkit import ZERO, parse
from gaugekit.geomodel import VectorFrame
from gaugekit.symlinalg import ExprMatrix
from gaugekit.verify import SampleSpec, max_residual, sample_points

XY = ("x", "y")
XYZ = ("x", "y", "z")


def vec(*parts, coords=XY):
    return tuple(parse(p, coords) for p in parts)


def frame(name, *vectors, coords=XY):
    return VectorFrame.from_vectors(name, [[parse(c, coords) for c in v] for v in vectors])


# ------------------------------------------------------------------ brackets

def test_bracket_examples():
    assert lie_bracket(vec("1", "0"), vec("0", "1"), PLANE) == (ZERO, ZERO)
    assert lie_bracket(vec("1", "0"), vec("x", "0"), PLANE) == vec("1", "0")
    # X = d_x, Y = d_x + f d_y  ->  f' d_y
    assert lie_bracket(vec("1", "0"), vec("1", "x^3"), PLANE) == vec("0", "3*x^2")


def test_coordinate_frame_has_zero_structure(worked):
    C = structure_functions(worked.coordinate_frame(), worked.chart)
    assert all(v == ZERO for plane in C.C for row in plane for v in row)


def test_structure_functions_derived_example():
    C = structure_functions(frame("f", ["1", "0"], ["x", "1"]), PLANE)
    # [d_x, x d_x + d_y] = d_x = rho_0
    assert C[0, 0, 1] == parse("1") and C[0, 1, 0] == parse("-1")
    assert all(C[c, a, b] == ZERO for c in range(2) for a in range(2) for b in range(2) if (c, a, b) not in
               {(0, 0, 1), (0, 1, 0)})
    assert C.residual.max_abs <= 1e-9


def test_non_involutive_frame_reports_witness():
    with pytest.raises(NonInvolutiveError) as info:
        structure_functions(frame("f", ["1", "0"], ["0", "x"]), PLANE)
    assert info.value.witness is not None
    assert abs(info.value.witness["x"]) < 1e-3


def test_rank_deficient_frame_needs_override():
    with pytest.raises(StructureFunctionsRequired):
        structure_functions(frame("f", ["1", "0"], ["2", "0"]), PLANE)
    C = structure_functions(frame("f", ["1", "0"], ["2", "0"]), PLANE, override=StructFun.zero(2))
    assert C.residual.max_abs == 0


def test_wrong_override_rejected():
    bad = StructFun.from_entries(2, {(0, 0, 1): parse("1")})
    with pytest.raises(NonInvolutiveError):
        structure_functions(frame("f", ["1", "0"], ["0", "1"]), PLANE, override=bad)


def test_structure_antisymmetry_enforced():
    with pytest.raises(ValueError):
        StructFun.from_entries(2, {(0, 0, 1): parse("1"), (0, 1, 0): parse("1")})


@pytest.mark.parametrize("seed", range(5))
def test_anchor_homomorphism_random_frames(seed):
    E, fr, C = random_case(seed)
    rho = fr.rho
    exprs = []
    for a in range(2):
        for b in range(2):
            br = lie_bracket(rho.col(a), rho.col(b), PLANE)
            for mu in range(2):
                exprs.append(br[mu] - sum((C[c, a, b] * rho[mu, c] for c in range(2)), ZERO))
    assert max_residual(exprs, PLANE.cube(), "homomorphism").max_abs <= 1e-9


# ------------------------------------------------------------------ Lie derivative and forms

def test_worked_example_lie_derivatives(worked):
    LE = lie_derivative(worked.E, vec("1", "0", "0", coords=XYZ), worked.chart)
    assert LE == ExprMatrix.from_text([["0", "0", "1"], ["0", "0", "0"], ["-1", "0", "2*x"]], XYZ)
    assert lie_derivative(worked.E, vec("0", "1", "0", coords=XYZ), worked.chart) == ExprMatrix.zeros(3, 3)


def test_rotation_is_killing_for_flat_metric():
    rot = vec("-y", "x")
    assert lie_derivative(ExprMatrix.identity(2), rot, PLANE) == ExprMatrix.zeros(2, 2)


def test_exterior_derivative_examples(worked):
    C2 = FormField(2, 3, {(0, 2): parse("2*x", XYZ)})
    assert exterior_derivative(C2, worked.chart).is_zero()
    xdy = FormField.one_form([ZERO, parse("x", XY)])
    assert exterior_derivative(xdy, PLANE) == FormField(2, 2, {(0, 1): parse("1")})
    with pytest.raises(ValueError):
        exterior_derivative(FormField(3, 3, {(0, 1, 2): parse("x", XYZ)}), worked.chart)


def test_interior_product_examples():
    dxdz = FormField(2, 3, {(0, 2): parse("1")})
    assert interior_product(vec("1", "0", "0", coords=XYZ), dxdz) == FormField.one_form([ZERO, ZERO, parse("1")])
    two_x = FormField(2, 3, {(0, 2): parse("2*x", XYZ)})
    assert interior_product(vec("0", "1", "0", coords=XYZ), two_x).is_zero()
    with pytest.raises(ValueError):
        interior_product(vec("1", "0"), FormField.scalar(parse("x", XY), 2))


def test_wedge_antisymmetry():
    a = FormField.one_form([parse("x", XY), parse("1")])
    b = FormField.one_form([parse("y", XY), parse("x^2", XY)])
    assert wedge(a, b) == -wedge(b, a)
    assert wedge(a, a).is_zero()


POLY = st.sampled_from(["0", "1", "x", "y", "x*y", "x^2", "y^2", "x-y", "sin(x)", "exp(y)"])


def _form(degree, comps):
    keys = [(0,), (1,), (2,)] if degree == 1 else [(0, 1), (0, 2), (1, 2)]
    return FormField(degree, 3, {k: parse(c, XYZ) for k, c in zip(keys, comps)})


@given(st.integers(1, 2), st.lists(POLY, min_size=3, max_size=3), st.lists(POLY, min_size=3, max_size=3))
@settings(max_examples=60)
def test_cartan_formula(degree, comps, vcomps):
    from gaugekit.geomodel import Chart

    chart = Chart(XYZ)
    w = _form(degree, comps)
    v = tuple(parse(c, XYZ) for c in vcomps)
    lhs = lie_derivative(w, v, chart)
    rhs = exterior_derivative(interior_product(v, w), chart) + interior_product(v, exterior_derivative(w, chart))
    assert max_residual((lhs - rhs).values(), SampleSpec.cube(XYZ, count=40), "cartan").max_abs <= 1e-9


@given(st.lists(POLY, min_size=3, max_size=3))
@settings(max_examples=40)
def test_d_squared_vanishes(comps):
    from gaugekit.geomodel import Chart

    chart = Chart(XYZ)
    w = _form(1, comps)
    assert exterior_derivative(exterior_derivative(w, chart), chart).is_zero()
    f = FormField.scalar(parse(comps[0], XYZ), 3)
    assert exterior_derivative(exterior_derivative(f, chart), chart).is_zero()


@given(st.lists(POLY, min_size=3, max_size=3), st.lists(POLY, min_size=3, max_size=3))
@settings(max_examples=40)
def test_double_contraction_vanishes(comps, vcomps):
    v = tuple(parse(c, XYZ) for c in vcomps)
    w = _form(2, comps)
    assert interior_product(v, interior_product(v, w)).is_zero()


# ------------------------------------------------------------------ lifted metric

def test_lifted_metric_examples(worked):
    Eb = lifted_metric(worked.E, worked.frame("dx_dz"))
    assert Eb == ExprMatrix.from_text([["1", "x"], ["-x", "1+x^2"]], XYZ)
    assert lifted_metric(worked.E, worked.coordinate_frame()) == worked.E


@pytest.mark.parametrize("seed", range(4))
def test_lifted_metric_matches_numeric_product(seed):
    E, fr, _ = random_case(seed)
    s = sample_points(PLANE.cube(count=50))
    rho = fr.rho.evaluate(s)
    ref = np.einsum("mua,muv,mvb->mab", rho, E.evaluate(s), rho)
    assert np.abs(lifted_metric(E, fr).evaluate(s) - ref).max() <= 1e-12


def test_q_lie_derivative_coordinate_frame_is_directional(worked):
    fr = worked.coordinate_frame()
    zero = StructFun.zero(3)
    for a, c in enumerate(XYZ):
        from gaugekit.exprkit import diff

        assert q_lie_derivative(worked.E, fr, zero, a, worked.chart) == worked.E.map(lambda e: diff(e, c))


@pytest.mark.parametrize("name", ["dx_dy", "dx_dz", "dx_dy_dz"])
def test_lifting_identity_worked_example(worked, name):
    fr = worked.frame(name)
    C = structure_functions(fr, worked.chart)
    assert lifting_residual(worked.E, fr, C, worked.chart, worked.default_spec()).max_abs <= 1e-10


@pytest.mark.parametrize("seed", range(5))
def test_lifting_identity_random(seed):
    E, fr, C = random_case(seed)
    assert lifting_residual(E, fr, C, PLANE, PLANE.cube()).max_abs <= 1e-9


@pytest.mark.parametrize("seed", range(5))
def test_lemma_identity_random(seed):
    E, fr, C = random_case(seed)
    assert not C.is_constant()
    assert max_residual(lemma_identity_terms(E, fr, C, PLANE), PLANE.cube(), "lemma").max_abs <= 1e-9


def test_lemma_identity_fails_for_wrong_structure_functions():
    E, fr, C = random_case(0)
    wrong = StructFun.zero(2)
    assert max_residual(lemma_identity_terms(E, fr, wrong, PLANE), PLANE.cube(), "lemma").max_abs > 1e-3


def test_rank_drop_between_samples_is_not_flagged():
    # involutive frame whose rank drops on x = 0; excluding x keeps every sample off the drop
    fr = frame("jump", ["1", "0"], ["1", "x^2"])
    spec = PLANE.cube(count=40).excluding(parse("x", XY))
    C = structure_functions(fr, PLANE, spec)
    assert C[1, 0, 1] == parse("2/x", XY)


def test_non_involutive_drop_between_samples_is_flagged():
    spec = PLANE.cube(count=40).excluding(parse("x", XY))
    with pytest.raises(NonInvolutiveError) as info:
        structure_functions(frame("f", ["1", "0"], ["0", "x"]), PLANE, spec)
    assert abs(info.value.witness["x"]) < 1e-3
