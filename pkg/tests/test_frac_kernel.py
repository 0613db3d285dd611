import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma, gammaln

from fracnls.frac_kernel import (
    bound_constants,
    central_coefficient,
    check_alpha,
    compute_coefficients,
    tail_bounds,
)

ALPHAS = [1.1, 1.3, 1.5, 1.7, 1.9]


def direct_coefficient(alpha, k):
    """[DERIVED] c_k from the Gamma-function definition, evaluated independently."""
    return (-1) ** k * gamma(alpha + 1) / (gamma(alpha / 2 - k + 1) * gamma(alpha / 2 + k + 1))


@pytest.mark.parametrize("alpha", ALPHAS + [1.01, 1.99])
def test_recurrence_matches_gamma_definition(alpha):
    c = compute_coefficients(alpha, 51)
    ref = np.array([direct_coefficient(alpha, k) for k in range(51)])
    np.testing.assert_allclose(c.coeffs, ref, rtol=1e-10)


def test_central_coefficient_matches_log_gamma():
    for a in ALPHAS:
        assert central_coefficient(a) == pytest.approx(math.exp(gammaln(a + 1) - 2 * gammaln(a / 2 + 1)), rel=1e-14)


def test_second_order_stencil_at_alpha_two():
    # [TRIVIAL] alpha = 2 collapses to the three-point Laplacian
    c = compute_coefficients(2.0, 8)
    np.testing.assert_allclose(c.coeffs, [2, -1, 0, 0, 0, 0, 0, 0], atol=1e-15)


@pytest.mark.parametrize("alpha", ALPHAS)
def test_sign_and_sum_properties(alpha):
    n = 2 ** 10
    c = compute_coefficients(alpha, n).coeffs
    assert c[0] >= 0
    assert np.all(c[1:] <= 0)
    residual = c[0] - 2 * np.sum(np.abs(c[1:]))
    # the full series sums to zero, so the residual is twice the tail past n-1
    assert 0 < residual < 2 * tail_bounds(alpha, n - 1)[1]


@pytest.mark.parametrize("alpha", [1.2, 1.5, 1.8])
@pytest.mark.parametrize("k0", [3, 10, 100])
def test_tail_bounds_sandwich_partial_sums(alpha, k0):
    # [DERIVED] oracle: direct summation of 10^6 terms plus the asymptotic remainder
    N = 10 ** 6
    c = np.abs(compute_coefficients(alpha, N + 1).coeffs)
    partial = c[k0 + 1:].sum()
    remainder = gamma(alpha + 1) * math.sin(math.pi * alpha / 2) / math.pi * N ** (-alpha) / alpha
    lo, hi = tail_bounds(alpha, k0)
    assert lo < partial + remainder
    assert partial < hi


def test_deterministic_bit_identical():
    a = compute_coefficients(1.37, 4096).coeffs
    b = compute_coefficients(1.37, 4096).coeffs
    assert a.tobytes() == b.tobytes()


def test_table_is_read_only():
    c = compute_coefficients(1.5, 10)
    with pytest.raises(ValueError):
        c.coeffs[0] = 1.0
    assert len(c) == 10 and c[1] == c.coeffs[1]


@pytest.mark.parametrize("bad", [1.0, 0.5, 2.0001, -1.5, float("nan")])
def test_invalid_order_rejected(bad):
    with pytest.raises(ValueError):
        check_alpha(bad)


def test_invalid_lengths_rejected():
    with pytest.raises(ValueError):
        compute_coefficients(1.5, 0)
    with pytest.raises(ValueError):
        tail_bounds(1.5, 2)


def test_bound_constants_consistent_with_tail_bounds():
    for a in ALPHAS:
        bc = bound_constants(a)
        lo, hi = tail_bounds(a, 7)
        assert lo == pytest.approx(bc.theta / 7.5 ** a, rel=1e-14)
        assert hi == pytest.approx(bc.theta0 / 6.0 ** a, rel=1e-14)
        assert 0 < bc.theta < bc.theta0 and not bc.degenerate


def test_bounds_degenerate_at_alpha_two():
    bc = bound_constants(2.0)
    assert bc.degenerate and bc.theta == 0.0 and bc.theta0 == 0.0
    assert tail_bounds(2.0, 5) == (0.0, 0.0)


@settings(max_examples=60, deadline=None)
@given(alpha=st.floats(1.001, 2.0), n=st.integers(2, 400))
def test_property_signs_and_monotone_decay(alpha, n):
    c = compute_coefficients(alpha, n).coeffs
    assert c[0] > 0
    assert np.all(c[1:] <= 0)
    assert np.all(np.diff(np.abs(c[1:])) <= 1e-300)
    assert c[0] + 2 * c[1:].sum() >= -1e-12
