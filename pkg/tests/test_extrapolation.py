import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import lagrange_weights, solve_weights
from rrsa import ConfigError, compute_weights, independent_variance_multiplier
from rrsa.extrapolation import MAX_LEVELS, vandermonde_matrix, vandermonde_residual


@pytest.mark.parametrize("R", range(1, MAX_LEVELS + 1))
@pytest.mark.parametrize("alpha", [1, 2])
def test_integer_order_weights_are_exact(R, alpha):
    w = compute_weights(R, alpha).w
    exact = [float(f) for f in lagrange_weights(R, alpha)]
    if alpha == 1:
        assert list(w) == exact
    else:
        assert np.allclose(w, exact, rtol=1e-12, atol=0)


def test_alpha_one_binomial_form():
    for R in range(1, 7):
        expect = [(-1) ** (R - r) * r ** R / (math.factorial(r) * math.factorial(R - r))
                  for r in range(1, R + 1)]
        assert list(compute_weights(R, 1.0).w) == expect


@pytest.mark.parametrize("alpha", [0.5, 0.75, 1.5, 3.0])
def test_fractional_order_matches_dense_solve(alpha):
    for R in range(1, 6):
        assert np.allclose(compute_weights(R, alpha).w, solve_weights(R, alpha),
                           rtol=1e-8, atol=1e-10)


def test_known_small_cases():
    assert compute_weights(1).w == (1.0,)
    assert compute_weights(2).w == (-1.0, 2.0)
    assert compute_weights(3).w == (0.5, -4.0, 4.5)
    assert compute_weights(3).damped == pytest.approx(1 / 6, abs=0)


def test_damped_weight_sign_and_magnitude():
    for R in range(1, 7):
        for a in (0.5, 1.0, 2.0):
            d = compute_weights(R, a).damped
            assert d == pytest.approx((-1) ** (R - 1) / math.factorial(R) ** a, abs=1e-12)


def test_variance_multiplier():
    assert independent_variance_multiplier(3, 1.0) == 36.5
    assert independent_variance_multiplier(1, 1.0) == 1.0
    # the multiplier dominates (R^R / R!)^2 for alpha = 1
    for R in range(2, 7):
        assert independent_variance_multiplier(R) >= (R ** R / math.factorial(R)) ** 2


def test_large_levels_stay_finite():
    w = compute_weights(MAX_LEVELS, 4.0)
    assert all(math.isfinite(x) for x in w.w)
    assert math.fsum(w.w) == pytest.approx(1.0, abs=1e-6)


def test_combine():
    w = compute_weights(3)
    assert w.combine([2.0, 2.0, 2.0]) == pytest.approx(2.0, abs=1e-14)
    with pytest.raises(ValueError):
        w.combine([1.0, 2.0])


@pytest.mark.parametrize("R,alpha", [(0, 1.0), (9, 1.0), (2, 0.0), (2, -1.0),
                                     (2, math.nan), (2, math.inf), (1.5, 1.0), (True, 1.0)])
def test_rejects_bad_input(R, alpha):
    with pytest.raises(ConfigError):
        compute_weights(R, alpha)


def test_vandermonde_matrix_layout():
    V = vandermonde_matrix(3, 1.0)
    assert V[0].tolist() == [1.0, 1.0, 1.0]
    assert V[2].tolist() == [1.0, 0.25, 1 / 9]


@settings(max_examples=150, deadline=None)
@given(R=st.integers(1, 6), alpha=st.floats(0.25, 3.0))
def test_property_weights_solve_system(R, alpha):
    w = compute_weights(R, alpha)
    assert vandermonde_residual(w) < 1e-9
    assert abs(math.fsum(w.w) - 1.0) < 1e-9
    # signs alternate, ending positive
    assert all((x > 0) == ((R - r) % 2 == 0) for r, x in enumerate(w.w, 1))


@settings(max_examples=100, deadline=None)
@given(R=st.integers(2, 6), alpha=st.sampled_from([0.5, 1.0, 2.0]),
       c=st.floats(-10, 10), coeffs=st.lists(st.floats(-5, 5), min_size=6, max_size=6))
def test_property_cancels_polynomial_bias(R, alpha, c, coeffs):
    # theta(n) = c + sum_k a_k n^(-alpha k): all terms k < R are removed
    w = compute_weights(R, alpha)
    n = 3.0
    vals = [c + sum(a * (r * n) ** (-alpha * k) for k, a in enumerate(coeffs[:R - 1], 1))
            for r in range(1, R + 1)]
    assert w.combine(vals) == pytest.approx(c, abs=1e-8 * (1 + max(map(abs, coeffs))))
