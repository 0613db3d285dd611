"""Linearly implicit conservative solvers for repulsive space-fractional
nonlinear Schroedinger equations, with circulant-preconditioned GMRES on the
real block form of each time level.

Modules
-------
``frac_kernel``       fractional centred-difference coefficients and their bounds
``operators``         Toeplitz / circulant operators, FFT plumbing, real block form
``splitting_theory``  DNTB splitting, its contraction bound and optimal parameter
``preconditioners``   DNCB and CPMHSS fast solvers (plus dense references)
``krylov``            left-preconditioned GMRES and omega sweeps
``licd_stepper``      the three-level time stepper and conserved quantities
``spectra``           dense spectral and bound verification
``cli``               experiment harness (``fracnls`` command)
"""
from .frac_kernel import (
    BoundConstants,
    CoefficientTable,
    bound_constants,
    central_coefficient,
    compute_coefficients,
    tail_bounds,
)
from .krylov import SolveReport, SweepResult, gmres, omega_sweep
from .licd_stepper import (
    Case,
    ConvergenceError,
    FieldState,
    ModelParams,
    RunResult,
    SolverConfig,
    discrete_energy,
    discrete_mass,
    initial_state,
    run,
    step,
)
from .operators import (
    BlockSystem,
    CirculantOperator,
    CirculantScheme,
    GridSpec,
    ToeplitzOperator,
    build_toeplitz,
    circulant_approx,
    complex_to_block,
)
from .preconditioners import build_cpmhss, build_dncb
from .spectra import bound_audit, decomposition_check, preconditioned_spectrum
from .splitting_theory import SpectralIntervals, optimal_omega, sigma_bound

__version__ = "0.1.0"

__all__ = [
    "BoundConstants", "CoefficientTable", "bound_constants", "central_coefficient", "compute_coefficients",
    "tail_bounds", "SolveReport", "SweepResult", "gmres", "omega_sweep", "Case", "ConvergenceError",
    "FieldState", "ModelParams", "RunResult", "SolverConfig", "discrete_energy", "discrete_mass",
    "initial_state", "run", "step", "BlockSystem", "CirculantOperator", "CirculantScheme", "GridSpec",
    "ToeplitzOperator", "build_toeplitz", "circulant_approx", "complex_to_block", "build_cpmhss", "build_dncb",
    "bound_audit", "decomposition_check", "preconditioned_spectrum", "SpectralIntervals", "optimal_omega",
    "sigma_bound",
]
