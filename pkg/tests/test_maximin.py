import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import linprog

from cvverify.analysis import optimize_mu
from cvverify.errors import BadRange
from cvverify.maximin import solve_game


def simplex_grid(n, step):
    """All points of the n-simplex on a grid of the given step (n <= 3)."""
    k = int(round(1 / step))
    if n == 1:
        return np.ones((1, 1))
    if n == 2:
        a = np.arange(k + 1) / k
        return np.stack([a, 1 - a], axis=1)
    i, j = np.meshgrid(np.arange(k + 1), np.arange(k + 1), indexing="ij")
    keep = i + j <= k
    a, b = i[keep] / k, j[keep] / k
    return np.stack([a, b, 1 - a - b], axis=1)


def linprog_value(k):
    rows, cols = k.shape
    c = np.zeros(rows + 1)
    c[-1] = -1
    a_ub = np.hstack([-k.T, np.ones((cols, 1))])
    res = linprog(c, A_ub=a_ub, b_ub=np.zeros(cols), A_eq=[[1] * rows + [0]], b_eq=[1],
                  bounds=[(0, None)] * rows + [(None, None)])
    return -res.fun


def test_single_setting():
    r = optimize_mu(np.array([[0.5, 0.7]]))
    assert np.allclose(r.mu, [1]) and abs(r.nu_opt - 0.5) < 1e-12


def test_identity_game():
    r = optimize_mu(np.eye(2))
    assert np.allclose(r.mu, [0.5, 0.5]) and abs(r.nu_opt - 0.5) < 1e-12
    grid = simplex_grid(2, 1e-4)
    assert abs((grid @ np.eye(2)).min(axis=1).max() - 0.5) < 1e-12


def test_zero_column_gives_zero():
    r = optimize_mu(np.array([[0.4, 0.0], [0.9, 0.0]]))
    assert r.nu_opt == 0.0
    assert 1 in r.active_families


def test_reference_matrix():
    k = np.array([[0.389, 0.429, 0.798, 0], [0.341, 0.429, 0, 0.778], [0.996, 0, 0.554, 0.524]])
    r = optimize_mu(k)
    assert 2.474 <= 1 / r.nu_opt <= 2.494
    assert np.allclose(r.mu, [0.463, 0.477, 0.060], atol=5e-3)
    assert abs(r.nu_opt - linprog_value(k)) < 1e-10
    assert abs(r.nu_opt - r.dual_value) < 1e-8


def test_bad_input():
    with pytest.raises(BadRange):
        optimize_mu(np.zeros((0, 3)))


kmat = st.integers(1, 3).flatmap(lambda r: st.integers(1, 5).flatmap(
    lambda c: arrays(np.float64, (r, c), elements=st.floats(0, 1, allow_nan=False))))


@given(kmat)
def test_lp_against_grid_and_duality(k):
    r = optimize_mu(k)
    assert abs(r.mu.sum() - 1) < 1e-12 and np.all(r.mu >= -1e-15)
    assert abs(r.nu_opt - (r.mu @ k).min()) < 1e-9
    assert abs(r.nu_opt - r.dual_value) < 1e-8
    assert abs(r.certificate.sum() - 1) < 1e-9
    grid = simplex_grid(k.shape[0], 1e-3)
    assert (grid @ k).min(axis=1).max() <= r.nu_opt + 1e-3
    assert abs(r.nu_opt - linprog_value(k)) < 1e-9


@given(arrays(np.float64, (4, 6), elements=st.floats(-2, 2, allow_nan=False)))
def test_game_value_bracketed_by_strategies(a):
    sol = solve_game(a)
    assert np.min(sol.row_strategy @ a) >= sol.value - 1e-9
    assert np.max(a @ sol.column_strategy) <= sol.value + 1e-9
