import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from batchalloc.simplex import LinearProgram, SolverError, Tableau, linprog_max, solve


def _random_lp(rng, m, n, neg_b=False):
    A = rng.uniform(-1, 2, (m, n))
    b = rng.uniform(0.5, 3, m)
    if neg_b:
        b[rng.random(m) < 0.3] *= -0.2
    c = rng.uniform(-1, 2, n)
    return c, A, b


def _highs(c, A, b):
    return linprog(-c, A_ub=A, b_ub=b, bounds=[(0, None)] * c.size, method="highs")


def test_textbook_example():
    # max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18: optimum (2, 6), value 36, duals (0, 3/2, 1)
    sol = linprog_max([3, 5], [[1, 0], [0, 2], [3, 2]], [4, 12, 18])
    assert sol.optimal
    assert np.allclose(sol.x, [2, 6])
    assert abs(sol.objective - 36) < 1e-12
    assert np.allclose(sol.duals, [0, 1.5, 1])


def test_infeasible_and_unbounded():
    assert solve(LinearProgram([1.0], [[1.0], [-1.0]], [1.0, -2.0])).status == "infeasible"
    assert solve(LinearProgram([1.0, 1.0], [[1.0, -1.0]], [1.0])).status == "unbounded"


def test_empty_program():
    sol = solve(LinearProgram(np.zeros(0), np.zeros((0, 0)), np.zeros(0)))
    assert sol.optimal and sol.objective == 0.0


def test_shape_validation():
    with pytest.raises(ValueError):
        LinearProgram([1.0, 2.0], [[1.0]], [1.0])
    with pytest.raises(ValueError):
        LinearProgram([np.inf], [[1.0]], [1.0])


@pytest.mark.parametrize("seed", range(60))
def test_against_highs(seed):
    rng = np.random.default_rng(seed)
    m, n = int(rng.integers(1, 9)), int(rng.integers(1, 9))
    c, A, b = _random_lp(rng, m, n, neg_b=seed % 2 == 1)
    ours = solve(LinearProgram(c, A, b))
    ref = _highs(c, A, b)
    if ref.status == 0:
        assert ours.optimal
        assert abs(ours.objective - (-ref.fun)) <= 1e-8 * max(1.0, abs(ref.fun))
        # dual feasibility, strong duality and complementary slackness
        y = ours.duals
        assert np.all(y >= -1e-9)
        assert np.all(A.T @ y >= c - 1e-8)
        assert abs(b @ y - ours.objective) < 1e-8 * max(1.0, abs(ours.objective))
        assert np.all(np.abs(y * (b - A @ ours.x)) < 1e-8)
    elif ref.status == 2:
        assert ours.status in ("infeasible", "unbounded")
    else:
        assert ref.status == 3 and ours.status == "unbounded"


def test_degenerate_assignment():
    # 3x3 assignment with all-equal weights: heavily degenerate
    n = 3
    A = []
    for i in range(n):
        A.append([1.0 if e // n == i else 0.0 for e in range(n * n)])
    for j in range(n):
        A.append([1.0 if e % n == j else 0.0 for e in range(n * n)])
    sol = linprog_max(np.ones(n * n), A, np.ones(2 * n))
    assert sol.optimal and abs(sol.objective - 3) < 1e-12


def test_warm_start_reoptimize():
    rng = np.random.default_rng(3)
    A = rng.uniform(0, 1, (5, 6))
    b = np.ones(5)
    tab = Tableau(A, b)
    for _ in range(10):
        c = rng.normal(size=6)
        warm = tab.optimize(c)
        cold = solve(LinearProgram(c, A, b))
        assert warm.optimal and abs(warm.objective - cold.objective) < 1e-10


def test_pivot_budget():
    rng = np.random.default_rng(0)
    c, A, b = _random_lp(rng, 8, 8)
    with pytest.raises(SolverError):
        solve(LinearProgram(c, A, b), max_pivots=1)


@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 10 ** 6))
def test_solution_is_feasible(m, n, seed):
    rng = np.random.default_rng(seed)
    A = rng.uniform(0, 1, (m, n))
    b = rng.uniform(0.1, 1, m)
    c = rng.normal(size=n)
    sol = solve(LinearProgram(c, A, b))
    assert sol.optimal
    assert np.all(sol.x >= -1e-12)
    assert np.all(A @ sol.x <= b + 1e-9)
    assert sol.objective >= -1e-12  # x = 0 is feasible
