# %% [markdown]
# # DNCB- and CPMHSS-preconditioned GMRES
#
# At production sizes only circulant preconditioners are affordable. Each
# application costs four FFTs. This script solves one level-2 system of the
# coupled equations with three methods: no preconditioner, DNCB and CPMHSS.
# It then scans omega.

# %%
import numpy as np

from fracnls.cli import ExperimentConfig, level_systems
from fracnls.krylov import gmres, omega_sweep
from fracnls.operators import circulant_approx
from fracnls.preconditioners import build_cpmhss, build_dncb

ls = level_systems("cnls", 1.5, 3200, ExperimentConfig())
system = ls.systems["u"]
C = circulant_approx(system.T, "strang")
dmax = np.abs(system.d).max()

for name, P in [("none", None), ("dncb", build_dncb(system.d, C, 0.15)),
                ("cpmhss", build_cpmhss(system.d, C, dmax + 0.3))]:
    rep = gmres(system, system.rhs, P, tol=1e-6)
    print(f"{name:>7}: {rep.iterations:4d} iterations, {rep.wall_time * 1e3:7.1f} ms")

# %%
sweep = omega_sweep(system, lambda w: build_dncb(system.d, C, w), np.round(np.arange(0.01, 1.0, 0.01), 2))
print(f"DNCB: min IT {sweep.min_iterations} on omega in {sweep.omega_range}")
