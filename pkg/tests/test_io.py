import json

import numpy as np
import pytest

from riskscope import io as rio
from riskscope.errors import ParseError, SchemaError
from riskscope.model import (
    Ball, Box, FixedNoise, GaussianNoise, ProblemInstance, ScaledL1, ScaledLqNorm, Singleton,
    SquaredL2, Sum, Zero,
)

PENALTIES = [Zero(), ScaledL1(0.3, 3), ScaledLqNorm(0.2, 2, "l2"), SquaredL2(0.1), Box(-1, 2),
             Box(0.0), Ball(2.0, (1, 2, 3, 4, 5)), Singleton(0.0), Sum(ScaledL1(0.5, 3), Box(0))]


@pytest.mark.parametrize("pen", PENALTIES, ids=lambda p: type(p).__name__)
def test_round_trip(tmp_path, pen):
    rng = np.random.default_rng(0)
    inst = ProblemInstance(rng.standard_normal((3, 5)), rng.standard_normal(5),
                           GaussianNoise(1.5, 2 ** 63 + 7), pen)
    path = rio.save_instance(tmp_path / "inst.json", inst)
    assert rio.load_instance(path) == inst
    doc = json.loads(path.read_text())
    assert doc["X"] == "inst.X.csv"


def test_round_trip_inline_fixed_noise(tmp_path):
    rng = np.random.default_rng(1)
    inst = ProblemInstance(rng.standard_normal((3, 2)), np.array([0.1, 1e-300]),
                           FixedNoise((1.0, -2.5, 1 / 3)), Zero())
    rio.save_instance(tmp_path / "i.json", inst, inline=True)
    assert rio.load_instance(tmp_path / "i.json") == inst


def test_csv_exact_repr(tmp_path):
    a = np.array([[0.1, 1 / 3], [-2e-310, 1e300]])
    rio.save_matrix(tmp_path / "a.csv", a)
    np.testing.assert_array_equal(rio.load_matrix(tmp_path / "a.csv"), a)


def test_ragged_csv(tmp_path):
    (tmp_path / "r.csv").write_text("1,2,3\n4,5\n")
    with pytest.raises(ParseError) as ei:
        rio.load_matrix(tmp_path / "r.csv")
    assert ei.value.line == 2


def test_non_numeric_cell():
    with pytest.raises(ParseError) as ei:
        rio.parse_csv_matrix("1,2\n3,x\n")
    assert (ei.value.line, ei.value.column) == (2, 2)


def test_missing_penalty_names_field():
    doc = {"X": [[1.0]], "beta_star": [0.0], "noise": {"type": "fixed", "vector": [1.0]}}
    with pytest.raises(SchemaError, match="penalty"):
        rio.instance_from_dict(doc)


def test_bad_penalty_value_names_field():
    doc = {"X": [[1.0]], "beta_star": [0.0], "noise": {"type": "fixed", "vector": [1.0]},
           "penalty": {"type": "scaled_l1", "lam": -1}}
    with pytest.raises(SchemaError, match="penalty/lam"):
        rio.instance_from_dict(doc)


def test_bad_json_location():
    with pytest.raises(ParseError) as ei:
        rio.parse_json('{"a": 1,\n "b": }')
    assert ei.value.line == 2


def test_dumps_sorted_and_infinite():
    s = rio.dumps({"b": np.float64(np.inf), "a": np.arange(2)})
    assert s.index('"a"') < s.index('"b"')
    assert json.loads(s) == {"a": [0, 1], "b": "inf"}
