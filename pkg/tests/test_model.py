import json
from decimal import Decimal
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fxsynth.errors import DimensionError, MissingRangeError, ModelParseError, NonFiniteError, ShapeMismatchError
from fxsynth.model import (
    LayerSpec,
    NetModel,
    dumps_model,
    eval_float,
    eval_float_trace,
    load_model,
    loads_model,
    nearest_float32,
    save_model,
)

from conftest import DATA
from oracles import random_net
from worked_example import FLOAT_VALUES, X0

EXAMPLE_DOC = json.loads((DATA / "example.json").read_text())


def test_load_example():
    m = load_model(DATA / "example.json")
    assert m.depth == 3
    assert m.widths == (2, 2, 2, 2)
    assert m.layers[0].weights[0] == (3.5, 0.25)
    assert m.layers[2].activation == "linear"


def _doc(**changes):
    d = json.loads(json.dumps(EXAMPLE_DOC))
    d.update(changes)
    return d


def test_empty_layers_is_shape_error():
    with pytest.raises(ShapeMismatchError):
        loads_model(json.dumps(_doc(layers=[])))


def test_nan_weight_rejected():
    text = (DATA / "example.json").read_text().replace("3.5", "NaN", 1)
    with pytest.raises(NonFiniteError):
        loads_model(text)


def test_huge_weight_rejected():
    text = (DATA / "example.json").read_text().replace("3.5", "1e60", 1)
    with pytest.raises(NonFiniteError):
        loads_model(text)


def test_missing_range():
    d = _doc()
    del d["input_range"]
    with pytest.raises(MissingRangeError):
        loads_model(json.dumps(d))


def test_shape_mismatch_between_layers():
    d = _doc()
    d["layers"][1]["weights"] = [[1.0], [2.0]]
    with pytest.raises(ShapeMismatchError):
        loads_model(json.dumps(d))


def test_bias_length_mismatch():
    d = _doc()
    d["layers"][0]["bias"] = [1.0]
    with pytest.raises(ShapeMismatchError):
        loads_model(json.dumps(d))


def test_bad_json_and_inverted_range(tmp_path):
    with pytest.raises(ModelParseError):
        loads_model("{not json")
    with pytest.raises(ModelParseError):
        loads_model(json.dumps(_doc(input_range=[[1, 0], [0, 1]])))
    with pytest.raises(ModelParseError):
        load_model(tmp_path / "absent.json")


def test_decimal_parsed_to_nearest_float32():
    assert nearest_float32(Decimal("0.1")) == float(np.float32(0.1))
    # halfway between 1 and the next float32: ties to even keeps 1
    half = Fraction(1) + Fraction(1, 2**24)
    assert nearest_float32(half) == 1.0
    # a hair above the tie must round up, which double rounding would miss
    assert nearest_float32(half + Fraction(1, 2**60)) == float(np.nextafter(np.float32(1), np.float32(2)))


@given(st.decimals(min_value=-1000, max_value=1000, allow_nan=False, places=12))
def test_nearest_float32_is_nearest(d):
    f = nearest_float32(d)
    q = Fraction(d)
    f32 = np.float32(f)
    for nb in (np.nextafter(f32, np.float32(-np.inf)), np.nextafter(f32, np.float32(np.inf))):
        assert abs(Fraction(float(f32)) - q) <= abs(Fraction(float(nb)) - q)


def test_eval_float_matches_reference_values(example):
    trace = eval_float_trace(example, X0)
    for k, (_, post) in enumerate(trace, start=1):
        for i, v in enumerate(post):
            assert abs(v - FLOAT_VALUES[(k, i)]) <= 5e-4


def test_eval_float_is_single_precision(example):
    out = eval_float(example, X0)
    for v in out:
        assert float(np.float32(v)) == v


def test_zero_and_identity_networks():
    zero = NetModel((LayerSpec(((0.0, 0.0), (0.0, 0.0)), (0.0, 0.0), "relu"),), 2, ((-1, 1), (-1, 1)))
    assert eval_float(zero, [0.3, -0.7]) == [0.0, 0.0]
    ident = NetModel((LayerSpec(((1.0, 0.0), (0.0, 1.0)), (0.0, 0.0), "linear"),), 2, ((-4, 4), (-4, 4)))
    assert eval_float(ident, [1, 2]) == [1.0, 2.0]


def test_dimension_mismatch(example):
    with pytest.raises(DimensionError):
        eval_float(example, [1.0])


def test_save_load_round_trip(tmp_path, rng):
    for _ in range(20):
        m = random_net(rng)
        p = tmp_path / "m.json"
        save_model(m, p)
        back = load_model(p)
        assert back == m
        assert dumps_model(back) == p.read_text()


def test_committed_fixture_is_canonical():
    m = load_model(DATA / "example.json")
    assert dumps_model(m) == (DATA / "example.json").read_text()
