# %% [markdown]
# # The DNTB iteration and its optimal parameter
#
# The real block form R = [T - D, -I; I, T - D] splits into a diagonal part
# B = diag(-D, -D) and a normal Toeplitz-block part H = [T, -I; I, T]. The
# alternating iteration contracts for every omega > 0. Its spectral radius is
# bounded by sigma(omega), and the interval relaxation sigma_hat has a
# computable minimizer.

# %%
import numpy as np

from fracnls.licd_stepper import ModelParams, SolverConfig, assemble_level, bootstrap_first_level, initial_state
from fracnls.operators import GridSpec, build_toeplitz, complex_to_block
from fracnls.splitting_theory import SpectralIntervals, dntb_iterate, optimal_omega, sigma_bound, sigma_hat

grid = GridSpec(-20.0, 20.0, 48, 0.5, 1.0, 1.5)
params = ModelParams(1.5)
state, _ = bootstrap_first_level(initial_state("dnls", grid), params, SolverConfig(method="ge"))
T = build_toeplitz(grid)
d, b = assemble_level(state, params, T)["u"]
system = complex_to_block(d, T, b)

t = np.linalg.eigvalsh(T.to_dense())
iv = SpectralIntervals.from_spectra(d, t)
best = optimal_omega(iv)
print(f"optimal omega = {best.omega_opt:.4f} (case {best.branch}), sigma_hat = {best.sigma_hat_at_opt:.4f}")

# %%
for omega in (0.5 * best.omega_opt, best.omega_opt, 2 * best.omega_opt):
    res = dntb_iterate(system, omega, tol=1e-10, maxit=2000)
    print(f"omega={omega:.4f}: sigma={sigma_bound(omega, d, t):.4f} sigma_hat={sigma_hat(omega, iv):.4f} "
          f"iterations={res.iterations} converged={res.converged}")
