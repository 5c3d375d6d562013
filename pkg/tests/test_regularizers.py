import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from batchalloc.regularizers import EPS_IND, RegularizerSchedule, big_f, f, gamma, recursion_maximizer


def test_gamma_small_values():
    assert gamma(1) == 1.0
    assert gamma(2) == 0.75
    assert abs(gamma(3) - 19 / 27) < 1e-15


def test_gamma_decreases_to_one_minus_inv_e():
    vals = np.array([gamma(K) for K in range(1, 1001)])
    assert np.all(np.diff(vals) < 0)
    assert vals[-1] > 1 - 1 / math.e
    assert vals[-1] - (1 - 1 / math.e) < 1e-3


@pytest.mark.parametrize("bad", [0, -1, 2.5])
def test_gamma_rejects_bad_k(bad):
    with pytest.raises(ValueError):
        gamma(bad)


def test_closed_forms_for_three_stages():
    # m = 2 for k = 1: f_1 = ((1 + x) / 2)^2, F_1 = 2/3 [((1 + x)/2)^3 - 1/8]
    s = RegularizerSchedule(3)
    for x in (0.0, 0.3, 1.0):
        assert abs(s.f(1, x) - ((1 + x) / 2) ** 2) < 1e-15
        assert abs(s.big_f(1, x) - 2 / 3 * (((1 + x) / 2) ** 3 - 1 / 8)) < 1e-15
        assert abs(s.f(2, x) - x) < 1e-15
        assert abs(s.big_f(2, x) - x * x / 2) < 1e-15


def test_last_stage_is_indicator():
    s = RegularizerSchedule(4)
    assert s.f(4, 1.0) == 1.0
    assert s.f(4, 1.0 - EPS_IND / 2) == 1.0
    assert s.f(4, 0.999) == 0.0
    assert np.all(s.big_f(4, np.linspace(0, 1, 11)) == 0.0)
    assert s.df(4, 0.5) == 0.0


def test_boundary_values():
    s = RegularizerSchedule(6)
    for k in range(1, 6):
        assert abs(s.f(k, 1.0) - 1.0) < 1e-15
        assert abs(s.big_f(k, 0.0)) < 1e-15


@given(st.integers(2, 9), st.data())
def test_primitive_and_derivative(K, data):
    s = RegularizerSchedule(K)
    k = data.draw(st.integers(1, K - 1))
    x = data.draw(st.floats(1e-3, 1 - 1e-3))
    h = 1e-6
    assert abs((s.big_f(k, x + h) - s.big_f(k, x - h)) / (2 * h) - s.f(k, x)) < 1e-7
    assert abs((s.f(k, x + h) - s.f(k, x - h)) / (2 * h) - s.df(k, x)) < 1e-6


@given(st.integers(2, 9), st.data())
def test_monotone_increasing_in_x_and_decreasing_degree(K, data):
    s = RegularizerSchedule(K)
    k = data.draw(st.integers(1, K - 1))
    xs = np.linspace(0, 1, 50)
    assert np.all(np.diff(s.f(k, xs)) >= -1e-15)
    if k + 1 < K:
        # later stages penalize unbalanced loads more strongly: f_{k+1} <= f_k
        assert np.all(s.f(k + 1, xs) <= s.f(k, xs) + 1e-15)


def test_vectorized_matches_scalar():
    s = RegularizerSchedule(5)
    xs = np.linspace(0, 1, 7)
    out = s.f(2, xs)
    assert isinstance(out, np.ndarray)
    assert np.allclose(out, [s.f(2, float(x)) for x in xs])
    assert isinstance(s.f(2, 0.5), float)


def test_argument_checks():
    s = RegularizerSchedule(3)
    with pytest.raises(ValueError):
        s.f(1, 1.1)
    with pytest.raises(ValueError):
        s.f(0, 0.5)
    with pytest.raises(ValueError):
        s.f(4, 0.5)
    with pytest.raises(ValueError):
        s.f(1, float("nan"))
    # rounding drift is clipped
    assert s.f(1, 1 + 1e-9) == 1.0
    with pytest.raises(ValueError):
        RegularizerSchedule(0)


@given(st.integers(2, 8), st.data())
def test_recursion_maximizer_beats_grid(K, data):
    s = RegularizerSchedule(K)
    k = data.draw(st.integers(1, K - 1))
    x = data.draw(st.floats(0, 1))
    y_star, val = s.recursion_maximizer(k, x)
    assert abs(y_star - (1 - x) / (K - k)) < 1e-15
    assert abs(val - s.f(k, x)) < 1e-12
    ys = np.linspace(0, 1 - x, 2001)
    grid = (1 - ys) * s.f(k + 1, np.minimum(1.0, x + ys))
    assert grid.max() <= val + 1e-12


def test_module_wrappers():
    s = RegularizerSchedule(3)
    assert f(s, 1, 0.2) == s.f(1, 0.2)
    assert big_f(s, 1, 0.2) == s.big_f(1, 0.2)
    assert recursion_maximizer(s, 1, 0.2) == s.recursion_maximizer(1, 0.2)
    with pytest.raises(ValueError):
        s.recursion_maximizer(3, 0.2)
