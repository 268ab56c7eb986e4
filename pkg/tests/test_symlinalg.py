import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaugekit.exprkit import Const, normalize, parse
from gaugekit.symlinalg import (
    ExprMatrix,
    RankDeficientError,
    ShapeError,
    SingularMatrixError,
    det,
    inverse,
    left_pinv,
    numeric_pinv,
    numeric_rank,
    rank_of,
)
from gaugekit.verify import SampleSpec, max_residual, sample_points

XYZ = ("x", "y", "z")
XY = ("x", "y")


def M(rows, coords=XYZ):
    return ExprMatrix.from_text(rows, coords)


def test_worked_example_determinant(worked):
    assert det(worked.E) == parse("1+2*x^2", XYZ)


def test_lifted_metric_and_its_determinant(worked):
    from gaugekit.cartan import lifted_metric

    Eb = lifted_metric(worked.E, worked.frame("dx_dz"))
    assert Eb == M([["1", "x"], ["-x", "1+x^2"]])
    assert det(Eb) == parse("1+2*x^2", XYZ)


def test_inverse_round_trip(worked):
    Ei = inverse(worked.E)
    assert Ei @ worked.E == ExprMatrix.identity(3)
    assert inverse(Ei) == worked.E


def test_singular_matrix_refused():
    with pytest.raises(SingularMatrixError):
        inverse(M([["1", "x"], ["2", "2*x"]]))


def test_shape_errors():
    with pytest.raises(ShapeError):
        det(M([["1", "2", "3"]]))
    with pytest.raises(ShapeError):
        M([["1", "2"]]) @ M([["1", "2"]])


def test_left_pinv_worked_example(worked):
    rho = worked.frame("dx_dy").rho
    assert left_pinv(rho) == M([["1", "0", "0"], ["0", "1", "0"]])


def test_left_pinv_rank_deficient():
    with pytest.raises(RankDeficientError):
        left_pinv(M([["1", "2"], ["0", "0"]], XY))


SMALL = ["0", "1", "-1", "2", "x", "y", "x*y", "1+x^2", "y-x", "x^2-y"]


@given(st.lists(st.sampled_from(SMALL), min_size=6, max_size=6))
@settings(max_examples=40)
def test_left_pinv_is_left_inverse(entries):
    m = ExprMatrix.from_text([entries[0:2], entries[2:4], entries[4:6]], XY)
    try:
        p = left_pinv(m)
    except RankDeficientError:
        return
    spec = SampleSpec.cube(XY, count=50, seed=1)
    eye = ExprMatrix.identity(2)
    r = max_residual([a - b for a, b in zip((p @ m).flat(), eye.flat())], spec, "left inverse")
    assert r.max_abs <= 1e-9


def test_left_pinv_matches_numpy_pinv():
    m = M([["1", "x"], ["y", "1"], ["x*y", "2"]], XY)
    p = left_pinv(m)
    s = sample_points(SampleSpec.cube(XY, count=30, seed=4))
    ours = p.evaluate(s)
    theirs = np.linalg.pinv(m.evaluate(s))
    assert np.allclose(ours, theirs, atol=1e-10)


def test_numeric_rank_profile():
    m = M([["1", "1"], ["1", "1+x^2"]], XY)
    prof = numeric_rank(m, SampleSpec.cube(XY, count=100))
    assert not prof.constant
    assert prof.min == 1 and prof.max == 2
    assert prof.witness(1) == {"x": 0.0, "y": 0.0}


def test_rank_of_batched():
    a = np.array([np.eye(3), np.diag([1.0, 0.0, 0.0]), np.zeros((3, 3))])
    assert rank_of(a).tolist() == [3, 1, 0]


def test_numeric_pinv_of_rank_one():
    a = np.array([[1.0, 2.0], [2.0, 4.0]])
    assert np.allclose(numeric_pinv(a) @ a @ numeric_pinv(a), numeric_pinv(a))


def test_matrix_arithmetic_normalizes():
    a = M([["x", "1"], ["0", "x"]], XY)
    assert (a - a) == ExprMatrix.zeros(2, 2)
    assert (a @ ExprMatrix.identity(2)) == a
    assert a.T[0, 1] == Const(0) and normalize(a.scale(2)[0, 0]) == parse("2*x", XY)
