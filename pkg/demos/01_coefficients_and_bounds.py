# %% [markdown]
# # Fractional centred-difference coefficients
#
# The discrete fractional Laplacian of order alpha is a symmetric Toeplitz
# matrix whose first column holds the coefficients c_k. They are generated by
# a ratio recurrence. The sum c_0 + 2 sum c_k vanishes, and the tails decay
# like k^(-alpha-1).

# %%
import numpy as np

from fracnls.frac_kernel import bound_constants, compute_coefficients, tail_bounds

for alpha in (1.1, 1.5, 1.9, 2.0):
    c = compute_coefficients(alpha, 8).coeffs
    print(f"alpha={alpha}: " + " ".join(f"{v:+.4f}" for v in c))

# %% [markdown]
# At alpha = 2 the stencil collapses to (2, -1, 0, ...). For alpha < 2 all
# off-diagonal coefficients are negative and their absolute sum approaches c_0.

# %%
alpha = 1.5
c = compute_coefficients(alpha, 10 ** 6 + 1).coeffs
for k0 in (3, 30, 300):
    lo, hi = tail_bounds(alpha, k0)
    print(f"k0={k0:4d}: {lo:.3e} <= sum_(k>k0)|c_k| ~ {np.abs(c[k0 + 1:]).sum():.3e} <= {hi:.3e}")
print(bound_constants(alpha))
