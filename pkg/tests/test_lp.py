import numpy as np
import pytest
from scipy.optimize import linprog

from gptlab.lp import solve_lp


def test_matches_highs_on_random_feasible_programs(rng):
    for _ in range(100):
        m, n = int(rng.integers(1, 6)), int(rng.integers(3, 25))
        A = rng.standard_normal((m, n))
        b = A @ rng.random(n)
        c = rng.random(n) + 0.1
        ours = solve_lp(c, A, b)
        ref = linprog(c, A_eq=A, b_eq=b, bounds=(0, None), method="highs")
        assert ours.success and ref.status == 0
        assert abs(ours.fun - ref.fun) <= 1e-8 * max(1.0, abs(ref.fun))
        np.testing.assert_allclose(A @ ours.x, b, atol=1e-9)
        assert (ours.x >= 0).all()


def test_dual_certifies_optimality(rng):
    A = rng.standard_normal((3, 10))
    b = A @ rng.random(10)
    c = rng.random(10)
    res = solve_lp(c, A, b)
    assert (res.dual @ A <= c + 1e-9).all()
    assert abs(res.dual @ b - res.fun) < 1e-9


def test_infeasible_program_carries_farkas_vector():
    # x1 + x2 = -1 with x >= 0
    A = np.array([[1.0, 1.0]])
    res = solve_lp(np.zeros(2), A, np.array([-1.0]))
    assert res.status == "infeasible"
    y = res.farkas
    assert (y @ A <= 1e-12).all() and y @ np.array([-1.0]) > 0


def test_unbounded_program():
    A = np.array([[1.0, -1.0]])
    res = solve_lp(np.array([-1.0, 0.0]), A, np.array([0.0]))
    assert res.status == "unbounded"


def test_redundant_rows_are_dropped():
    A = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 0.0], [0.0, 1.0, 1.0]])
    b = np.array([1.0, 2.0, 1.0])
    res = solve_lp(np.array([1.0, 2.0, 3.0]), A, b)
    assert res.success and len(res.redundant_rows) == 1
    ref = linprog([1.0, 2.0, 3.0], A_eq=A, b_eq=b, method="highs")
    assert abs(res.fun - ref.fun) < 1e-12


def test_degenerate_program_terminates_under_bland():
    # classic cycling example (Beale) rewritten in equality form with slacks
    A = np.array([[0.25, -8.0, -1.0, 9.0, 1.0, 0.0, 0.0],
                  [0.5, -12.0, -0.5, 3.0, 0.0, 1.0, 0.0],
                  [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]])
    b = np.array([0.0, 0.0, 1.0])
    c = np.array([-0.75, 20.0, -0.5, 6.0, 0.0, 0.0, 0.0])
    res = solve_lp(c, A, b)
    assert res.success
    assert abs(res.fun - (-1.25)) < 1e-12


def test_shape_errors():
    with pytest.raises(ValueError):
        solve_lp(np.zeros(3), np.zeros((2, 2)), np.zeros(2))
    with pytest.raises(ValueError):
        solve_lp(np.zeros(2), np.zeros((1, 2)), np.zeros(1), rule="steepest")
