# %% [markdown]
# # Toeplitz operator and its circulant approximations
#
# T = mu * toeplitz(c) with mu = gamma tau / h^alpha. Products with T use a
# circulant embedding of length >= 2M and cost O(M log M). Seven circulant
# approximations C of T are available; each is diagonalized by the FFT.

# %%
import numpy as np

from fracnls.operators import CirculantScheme, GridSpec, build_toeplitz, circulant_approx

grid = GridSpec(a=-20.0, b=20.0, M=256, tau=0.01, gamma=1.0, alpha=1.5)
T = build_toeplitz(grid)
x = np.random.default_rng(0).standard_normal(grid.M)
print("fast vs dense matvec:", np.abs(T.matvec(x) - T.to_dense() @ x).max())

# %% [markdown]
# Compare each circulant with T through the spread of the spectrum of C^-1 T.

# %%
ev_T = np.linalg.eigvalsh(T.to_dense())
print(f"T: eigenvalues in [{ev_T[0]:.2e}, {ev_T[-1]:.2e}]")
for scheme in CirculantScheme:
    C = circulant_approx(T, scheme)
    ev = np.linalg.eigvals(np.linalg.solve(C.to_dense(), T.to_dense())).real
    print(f"{scheme.value:>18}: C^-1 T eigenvalues in [{ev.min():.3f}, {ev.max():.3f}], "
          f"{np.mean(np.abs(ev - 1) < 0.1):.0%} within 0.1 of 1")
