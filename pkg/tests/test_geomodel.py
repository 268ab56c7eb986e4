import json

import pytest

from conftest import FIXTURES, load
from gaugekit.exprkit import parse
from gaugekit.geomodel import Chart, ModelError, dump_model, load_model, model_from_dict, validate
from gaugekit.symlinalg import det

BUNDLED = sorted(p.name for p in FIXTURES.glob("*.json") if "chart" in json.loads(p.read_text()))


def test_bundled_models_found():
    assert {"paper_r3.json", "flat_r2.json", "pl_r2.json"} <= set(BUNDLED)


def test_worked_example_loads(worked):
    assert worked.chart.coords == ("x", "y", "z")
    assert det(worked.E) == parse("1+2*x^2", worked.chart)
    assert set(worked.frames) == {"dx_dy", "dx_dz", "dx_dy_dz"}
    assert validate(worked).invertible


def test_worked_example_three_form_vanishes(worked):
    assert worked.three_form.is_zero()


def test_flat_identity_model_without_c2():
    m = model_from_dict({"chart": {"coords": ["x", "y"]}, "E": [["1", "0"], ["0", "1"]]})
    assert m.C2 is None and m.H is None
    assert m.two_form.is_zero()
    assert m.three_form is None  # no 3-forms on a 2-dimensional chart


@pytest.mark.parametrize(
    "doc,fragment",
    [
        ({"chart": {"coords": ["x", "y"]}, "E": [["1", "0"], ["0", "1"], ["1", "1"]]}, "E"),
        ({"chart": {"coords": ["x", "y"]}, "E": [["1", "w"], ["0", "1"]]}, "w"),
        ({"chart": {"dim": 3, "coords": ["x", "y"]}, "E": [["1", "0"], ["0", "1"]]}, "dim"),
        ({"chart": {"coords": ["x", "y"]}}, "E"),
        ({"chart": {"coords": ["x", "x"]}, "E": [["1", "0"], ["0", "1"]]}, "distinct"),
        ({"chart": {"coords": ["x", "y"]}, "E": [["1", "0"], ["0", "1"]], "frames": {"f": [["1"]]}}, "f"),
    ],
)
def test_schema_violations(doc, fragment):
    with pytest.raises(ModelError) as info:
        model_from_dict(doc)
    assert fragment in str(info.value)


def test_missing_file(tmp_path):
    with pytest.raises(ModelError):
        load_model(tmp_path / "nope.json")


def test_chart_validation():
    with pytest.raises(ModelError):
        Chart(("x", "2y"))


@pytest.mark.parametrize("name", BUNDLED)
def test_validate_bundled_models_clean(name):
    assert validate(load(name)).errors == []


@pytest.mark.parametrize("name", BUNDLED)
def test_model_round_trip(name):
    m = load(name)
    again = model_from_dict(json.loads(json.dumps(dump_model(m))))
    assert dump_model(again) == dump_model(m)
    assert again.E == m.E


def test_zero_row_flagged_non_invertible():
    m = model_from_dict({"chart": {"coords": ["x", "y"]}, "E": [["0", "0"], ["x", "1"]]})
    d = validate(m)
    assert d.det_verdict.zero and not d.invertible and d.warnings


def test_symmetric_perturbation_of_c2_detected():
    m = model_from_dict(
        {"chart": {"coords": ["x", "y"]}, "E": [["1", "x"], ["x", "1"]], "C2": [["0", "x"], ["x", "0"]]}
    )
    d = validate(m)
    assert d.c2_antisymmetry.max_abs > 1e-3
    assert d.errors


def test_decomposition_check():
    m = model_from_dict(
        {
            "chart": {"coords": ["x", "y"]},
            "E": [["1", "x"], ["-x", "1"]],
            "C2": [["0", "x"], ["-x", "0"]],
            "G": [["1", "0"], ["0", "2"]],
        }
    )
    assert validate(m).decomposition.max_abs == pytest.approx(1.0)


def test_unknown_frame_lists_choices(worked):
    with pytest.raises(ModelError) as info:
        worked.frame("dz")
    assert "dx_dz" in str(info.value)
