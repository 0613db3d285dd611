# %% [markdown]
# # Spectral verification at small M
#
# Dense eigenvalues of R and the preconditioned matrices, plus three checks:
# - the disk |z - 1| <= sigma(omega) holds the DNTB spectrum;
# - the eigenvalue bounds of T and C hold;
# - the low-rank plus small-norm split of F_DNCB^-1 F_DNTB - I.

# %%
from fracnls.cli import ExperimentConfig, level_systems
from fracnls.spectra import MATRIX_LABELS, admissible_epsilon, bound_audit, decomposition_check, preconditioned_spectrum

ls = level_systems("dnls", 1.7, 64, ExperimentConfig(case="dnls"))
system = ls.systems["u"]
for label in MATRIX_LABELS:
    rep = preconditioned_spectrum(label, system, None if label == "R" else 1.0)
    extra = "" if rep.fraction_in_disk is None else f", in sigma-disk: {rep.fraction_in_disk:.0%}"
    print(f"{label:>7}: Re in [{rep.min_real:.2e}, {rep.max_real:.2e}], |Im| <= {rep.max_abs_imag:.2f}{extra}")

# %%
audit = bound_audit(ls.grid)
print("bound checks:", audit.checks)
lo, hi = admissible_epsilon(ls.grid)
rep = decomposition_check(system, ls.grid, 0.1, (lo * hi) ** 0.5)
print(f"k0={rep.k0} rank(E)={rep.rank_E} ||E||={rep.norm_E:.2e}<={rep.bound_E:.2e} "
      f"||F||={rep.norm_F:.2e}<={rep.bound_F:.2e} identity error={rep.identity_error:.1e}")
