import itertools

import numpy as np
import pytest

from gptlab.chain import run_chain
from gptlab.core import membership, validate
from gptlab.errors import GPTError
from gptlab.fidelity import fidelity
from gptlab.models import (
    bloch_ball,
    bloch_directions,
    builtin_scenarios,
    catalog,
    classical_simplex,
    gbit,
    get_model,
    get_scenario,
    oscillating_permutation,
)
from gptlab.tensor import is_product_form, min_tensor_space, product_state
from gptlab.transforms import Transformation, verify_invertible


def test_catalog_entries_validate():
    for row in catalog().describe():
        assert row["valid"], row


def test_classical_simplex():
    S = classical_simplex(4)
    assert S.dim == 4 and len(S.pure_states) == 4
    np.testing.assert_array_equal(S.effect_rays.sum(axis=0)[:-1] @ S.pure_states[:, :-1].T, np.ones(4))
    for i in range(4):
        others = np.delete(S.pure_states, i, axis=0)
        from gptlab.core import StateSpace
        assert not membership(S.pure_states[i], StateSpace(others)).inside
    with pytest.raises(GPTError):
        classical_simplex(1)


def test_gbit_structure():
    g = gbit()
    assert len(g.pure_states) == 4 and len(g.effect_rays) == 4
    assert validate(g).ok
    rot = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    assert verify_invertible(Transformation(rot, g)).max_roundtrip_error <= 1e-12


def test_bloch_ball_construction():
    B = bloch_ball(100)
    assert B.approximate and B.geometry == "ball"
    assert validate(B).ok
    with pytest.raises(GPTError):
        bloch_ball(4)
    # nested directions in antipodal pairs
    d = bloch_directions(1000)
    np.testing.assert_array_equal(d[:200], bloch_directions(200))
    np.testing.assert_allclose(d[0::2], -d[1::2])
    np.testing.assert_allclose(np.linalg.norm(d, axis=1), 1.0, atol=1e-14)


def test_model_references():
    assert get_model("builtin:gbit") is gbit()
    assert get_model("builtin:classical:3") is classical_simplex(3)
    assert get_model("builtin:gbit*gbit") is min_tensor_space(gbit(), gbit())
    for bad in ("builtin:qutrit", "gbit", "builtin:classical:x"):
        with pytest.raises(GPTError):
            get_model(bad)


def test_oscillating_permutation_rules():
    perm = oscillating_permutation()
    assert sorted(perm) == list(range(9))
    # (s, a) -> index s*3 + a; blank=0, U=1, V=2
    assert perm[0] == 4 and perm[3] == 1 and perm[6] == 8
    # remaining points take the lowest free images in index order
    rest = [k for k in range(9) if k not in (0, 3, 6)]
    assert [perm[k] for k in rest] == sorted(set(range(9)) - {4, 1, 8})


def test_builtin_scenarios_are_certified():
    scs = builtin_scenarios()
    assert [s.label for s in scs] == ["cnot-copy", "oscillating-recorder", "nonorthogonal-probe"]
    for sc in scs:
        assert all(G.certificate is not None for G in sc.dynamics)


def test_oscillating_recorder_records_and_inputs():
    sc = get_scenario("builtin:oscillating-recorder")
    A = sc.apparatus_spaces[0]
    assert fidelity(A.vertex(1), A.vertex(2)).value == 0.0
    assert fidelity(*sc.inputs).value == 0.0
    assert run_chain(sc).verdict.outcome == "CONSISTENT"


def test_probe_output_is_correlated():
    sc = get_scenario("nonorthogonal-probe")
    S, A = sc.system_space, sc.apparatus_spaces[0]
    pair = min_tensor_space(S, A)
    from gptlab.core import State
    out = State(sc.dynamics[0].matrix @ product_state(sc.inputs[1], sc.blanks[0]).coords, pair)
    form = is_product_form(out)
    assert not form.is_product and abs(form.deviation - 0.25) <= 1e-12


def test_classical_and_gbit_lps_are_exact(rng):
    for space in (classical_simplex(3), gbit()):
        for i, j in itertools.combinations(range(len(space.pure_states)), 2):
            r = fidelity(space.vertex(i), space.vertex(j))
            assert r.gap_bound == 0.0
