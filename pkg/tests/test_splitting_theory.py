import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import level_system
from fracnls.operators import GridSpec
from fracnls.splitting_theory import (
    SpectralIntervals,
    condition_bound,
    dntb_iterate,
    eigenvalue_bounds,
    g_ratio,
    omega_star1,
    omega_star2,
    optimal_omega,
    sigma_bound,
    sigma_factors,
    sigma_hat,
)


def iteration_matrix(sys, omega):
    """[DERIVED] dense DNTB iteration matrix (wI + H)^-1 (wI - B)(wI + B)^-1 (wI - H)."""
    M = sys.M
    Td = sys.T.to_dense()
    eye = np.eye(M)
    H = np.block([[Td, -eye], [eye, Td]])
    Bd = -np.concatenate([sys.d, sys.d])
    I2 = np.eye(2 * M)
    step_b = ((omega - Bd) / (omega + Bd))[:, None] * I2
    return np.linalg.solve(omega * I2 + H, step_b @ (omega * I2 - H))


@pytest.mark.parametrize("M", [16, 32])
@pytest.mark.parametrize("alpha", [1.3, 1.7])
def test_spectral_radius_below_sigma(M, alpha):
    _, sys, d, _ = level_system(alpha, M)
    t = np.linalg.eigvalsh(sys.T.to_dense())
    iv = SpectralIntervals.from_spectra(d, t)
    for omega in np.geomspace(1e-3, 5.0, 7):
        rho = np.abs(np.linalg.eigvals(iteration_matrix(sys, omega))).max()
        sig = sigma_bound(omega, d, t)
        assert rho < 1
        assert rho <= sig * (1 + 1e-12)
        assert sig <= sigma_hat(omega, iv) * (1 + 1e-12)


def test_sigma_factors_and_product():
    iv = SpectralIntervals(-0.3, -0.01, 0.02, 5.0)
    s1, s2 = sigma_factors(0.4, iv)
    assert s1 == pytest.approx(max(abs((0.4 - 0.3) / 0.7), abs((0.4 - 0.01) / 0.41)))
    assert sigma_hat(0.4, iv) == pytest.approx(s1 * s2)
    assert 0 < s2 < 1


def test_optimal_omega_small_example():
    # [DERIVED] grid search on the two-point interval (lambda = 0, mu = 2)
    iv = SpectralIntervals(0.0, 0.0, 2.0, 2.0)
    res = optimal_omega(iv)
    grid = np.arange(1e-4, 10, 1e-4)
    vals = np.array([sigma_hat(w, iv) for w in grid])
    assert res.omega_opt == pytest.approx(math.sqrt(5.0), rel=1e-10)
    assert res.sigma_hat_at_opt <= vals.min() * (1 + 1e-8)
    assert res.sigma_hat_at_opt == pytest.approx(math.sqrt((math.sqrt(5) - 2) / (math.sqrt(5) + 2)), rel=1e-12)


def test_omega_star_closed_forms_minimize_factors():
    iv = SpectralIntervals(-0.5, -0.02, 0.3, 8.0)
    w1 = omega_star1(iv)
    grid = np.linspace(1e-3, 5, 200001)
    f1 = np.maximum(np.abs((grid - 0.5) / (grid + 0.5)), np.abs((grid - 0.02) / (grid + 0.02)))
    assert w1.omega == pytest.approx(grid[f1.argmin()], abs=1e-4)
    assert w1.sigma <= f1.min() * (1 + 1e-12)
    w2 = omega_star2(iv)
    f2 = np.array([sigma_factors(w, iv)[1] for w in grid[::50]])
    assert w2.sigma <= f2.min() * (1 + 1e-9)


def test_omega_star1_degenerate_cases():
    assert omega_star1(SpectralIntervals(0.0, 0.0, 1.0, 2.0)).degenerate
    s = omega_star1(SpectralIntervals(-1.0, 0.0, 1.0, 2.0))
    assert s.degenerate and s.sigma == 1.0


def test_g_ratio_is_product_of_factors():
    lam, mu, w = -0.2, 1.5, 0.7
    expected = (w + lam) / (w - lam) * math.sqrt(((w - mu) ** 2 + 1) / ((w + mu) ** 2 + 1))
    assert g_ratio(lam, mu, w) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("bad", [(0.1, 0.2, 1, 2), (-1, -2, 1, 2), (-1, 0, 0, 2), (-1, 0, 3, 2)])
def test_intervals_validated(bad):
    with pytest.raises(ValueError):
        SpectralIntervals(*bad)


def test_sigma_bound_rejects_bad_input():
    with pytest.raises(ValueError):
        sigma_bound(0.0, [-1.0], [1.0])
    with pytest.raises(ValueError):
        sigma_bound(1.0, [1.0], [1.0])
    with pytest.raises(ValueError):
        sigma_bound(1.0, [-1.0], [0.0])


@pytest.mark.parametrize("alpha", [1.3, 1.7])
def test_dntb_iterate_matches_direct_solve(alpha):
    # a large time step keeps the contraction factor well below one
    _, sys, d, _ = level_system(alpha, 32, tau=0.5)
    t = np.linalg.eigvalsh(sys.T.to_dense())
    w = optimal_omega(SpectralIntervals.from_spectra(d, t)).omega_opt
    tol = 1e-10
    res = dntb_iterate(sys, w, tol=tol, maxit=5000)
    assert res.converged
    x = np.linalg.solve(sys.to_dense(), sys.rhs)
    assert np.linalg.norm(res.x - x) <= 10 * tol * np.linalg.norm(x)


def test_dntb_iterate_reports_non_convergence():
    _, sys, _, _ = level_system(1.5, 16)
    res = dntb_iterate(sys, 0.1, tol=1e-14, maxit=3)
    assert not res.converged and res.iterations == 3


def test_eigenvalue_bounds_degenerate_at_alpha_two():
    g = GridSpec(-20, 20, 64, 0.01, 1.0, 2.0)
    eb = eigenvalue_bounds(g, "T")
    assert eb.degenerate and eb.lower == 0.0
    assert math.isinf(condition_bound(64, 2.0, "T"))


def test_condition_bound_circulant_divides_by_two_power():
    for a in (1.2, 1.8):
        kt, kc = condition_bound(100, a, "T"), condition_bound(100, a, "C")
        assert (kc + 1) == pytest.approx((kt + 1) / 2 ** a, rel=1e-12)


intervals = st.tuples(
    st.floats(-2.0, 0.0), st.floats(0.0, 1.0), st.floats(1e-3, 5.0), st.floats(1.0, 50.0)
).map(lambda t: SpectralIntervals(t[0], t[0] * t[1], t[2], t[2] * t[3]))


@settings(max_examples=40, deadline=None)
@given(iv=intervals)
def test_property_optimal_omega_beats_grid(iv):
    res = optimal_omega(iv)
    grid = np.geomspace(1e-4, 100, 4000)
    vals = np.array([sigma_hat(w, iv) for w in grid])
    assert res.sigma_hat_at_opt <= vals.min() * (1 + 1e-8)
    assert res.sigma_hat_at_opt < 1


def test_optimal_omega_tiny_diagonal_does_not_underflow():
    iv = SpectralIntervals(-1e-180, -1e-180, 1.0, 1.0)
    res = optimal_omega(iv)
    assert res.omega_opt == pytest.approx(1e-180, rel=1e-12)
    assert res.sigma_hat_at_opt == pytest.approx(0.0, abs=1e-12)
