import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gptlab import serialize
from gptlab.chain import run_chain
from gptlab.errors import GPTError, SchemaError
from gptlab.models import builtin_scenarios, catalog, classical_simplex, gbit, pr_box
from gptlab.tensor import MinTensorState, ProductState, min_tensor_space


def _reload(obj_dict):
    return json.loads(serialize.dumps(obj_dict))


@pytest.mark.parametrize("name", catalog().names())
def test_builtin_model_roundtrip(name):
    space = catalog().get(name)
    again = serialize.model_from_dict(_reload(serialize.model_to_dict(space)))
    np.testing.assert_array_equal(again.pure_states, space.pure_states)
    np.testing.assert_array_equal(again.effect_rays, space.effect_rays)
    assert again.geometry == space.geometry and again.label == space.label


@pytest.mark.parametrize("sc", builtin_scenarios(), ids=lambda s: s.label)
def test_builtin_scenario_roundtrip(sc):
    again = serialize.scenario_from_dict(_reload(serialize.scenario_to_dict(sc)))
    for G, H in zip(sc.dynamics, again.dynamics):
        np.testing.assert_array_equal(G.matrix, H.matrix)
    for a, b in zip(sc.inputs, again.inputs):
        np.testing.assert_array_equal(a.coords, b.coords)
    assert (again.j_max, again.tol, again.label) == (sc.j_max, sc.tol, sc.label)
    assert serialize.dumps(run_chain(again).to_dict()) == serialize.dumps(run_chain(sc).to_dict())


def test_redundant_vertex_rejected(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"label": "bad", "dim": 1, "pure_states": [[0.0], [1.0], [0.5]],
                             "effect_rays": [[1.0, 0.0], [-1.0, 1.0]]}))
    with pytest.raises(GPTError, match="not an extreme point"):
        serialize.load_model(p)


def test_model_schema_errors(tmp_path):
    with pytest.raises(SchemaError, match=r"model\.dim"):
        serialize.model_from_dict({"pure_states": [[0.0]]})
    with pytest.raises(SchemaError, match="rows need"):
        serialize.model_from_dict({"dim": 2, "pure_states": [[0.0, 1.0, 0.0, 1.0]]})
    p = tmp_path / "broken.json"
    p.write_text('{\n  "dim": 2,\n  "pure_states": [1, 2,,]\n}\n')
    with pytest.raises(SchemaError, match="line 3, column"):
        serialize.load_model(p)
    with pytest.raises(SchemaError, match="cannot read"):
        serialize.load_model(tmp_path / "missing.json")


def test_uncertified_dynamics_rejected(tmp_path):
    sc = builtin_scenarios()[0]
    d = serialize.scenario_to_dict(sc)
    pair = sc.dynamics[0].domain
    e = np.zeros(pair.dim + 1)
    e[-1] = 1.0
    # every state collapses onto one vertex: a valid map that cannot be inverted
    d["dynamics"][0] = {"matrix": np.outer(pair.pure_states[0], e).tolist()}
    p = tmp_path / "sc.json"
    p.write_text(json.dumps(d))
    with pytest.raises(GPTError, match="not invertible"):
        serialize.load_scenario(p)


def test_bad_permutation_rejected():
    d = serialize.scenario_to_dict(builtin_scenarios()[0])
    d["dynamics"][0]["permutation"] = [0, 0, 1, 2]
    with pytest.raises(SchemaError, match=r"dynamics\[0\]\.permutation"):
        serialize.scenario_from_dict(d)


def test_state_forms():
    S = classical_simplex(3)
    a = serialize.state_from_dict({"weights": [0.2, 0.3, 0.5]}, S)
    b = serialize.state_from_dict(serialize.state_to_dict(a), S)
    np.testing.assert_array_equal(a.coords, b.coords)
    np.testing.assert_array_equal(serialize.state_from_dict({"vertex": 1}, S).coords, S.pure_states[1])
    with pytest.raises(SchemaError):
        serialize.state_from_dict({"vertex": 7}, S)
    with pytest.raises(SchemaError):
        serialize.state_from_dict({"x": 1}, S)


def test_composite_roundtrip():
    g = gbit()
    prod = ProductState([g.vertex(0), g.vertex(2)])
    mix = MinTensorState([(0.25, prod), (0.75, ProductState([g.vertex(1), g.vertex(1)]))])
    for c in (prod, mix, pr_box()):
        again = serialize.composite_from_dict(_reload(serialize.composite_to_dict(c)))
        assert type(again) is type(c)
        key = "table" if hasattr(c, "table") else "coords"
        np.testing.assert_array_equal(getattr(again, key), getattr(c, key))


def test_factored_model_reference():
    g = gbit()
    again = serialize.model_from_dict(_reload(serialize.model_to_dict(min_tensor_space(g, g))))
    np.testing.assert_array_equal(again.pure_states, min_tensor_space(g, g).pure_states)


@given(st.lists(st.floats(allow_nan=True, allow_infinity=True, width=64), max_size=8))
def test_dumps_exact_and_finite(xs):
    text = serialize.dumps({"x": np.array(xs, dtype=np.float64)})
    back = json.loads(text)["x"]
    for a, b in zip(xs, back):
        if np.isfinite(a):
            assert b == a
        else:
            assert b is None


def test_trace_load_errors(tmp_path):
    p = tmp_path / "t.json"
    p.write_text(json.dumps({"stages": []}))
    with pytest.raises(SchemaError):
        serialize.load_trace(p)
