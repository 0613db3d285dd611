"""Dense spectral diagnostics for small block systems.

These routines assemble the block matrix, the preconditioned matrices and the
low-rank-plus-small-norm splitting explicitly, so they are limited to modest
``M``. They exist to check the analytic statements numerically.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .frac_kernel import bound_constants, central_coefficient
from .operators import BlockSystem, CirculantScheme, GridSpec, build_toeplitz, circulant_approx
from .preconditioners import (
    apply_cpmhss,
    apply_dncb,
    build_cpmhss,
    build_dncb,
    dense_dntb_matrix,
    dense_pmhss_matrix,
)
from .splitting_theory import condition_bound, eigenvalue_bounds, sigma_bound

__all__ = [
    "SPECTRA_LIMIT",
    "MATRIX_LABELS",
    "SpectrumReport",
    "DecompositionReport",
    "AuditReport",
    "dense_assemble",
    "preconditioned_spectrum",
    "decomposition_check",
    "admissible_epsilon",
    "bound_audit",
    "write_eigenvalues_csv",
]

#: Largest ``M`` for the dense routines in this module.
SPECTRA_LIMIT = 2048
#: Numerical rank cutoff relative to the largest singular value.
RANK_CUTOFF = 1e-10

MATRIX_LABELS = ("R", "DNTB", "DNCB", "PMHSS", "CPMHSS")


def _guard(M, limit=SPECTRA_LIMIT):
    if M > limit:
        raise ValueError(f"dense spectral routines are limited to M <= {limit}, got M={M}")


def _columnwise(apply, R):
    return np.column_stack([apply(R[:, k]) for k in range(R.shape[1])])


def dense_assemble(which: str, system: BlockSystem, omega: float | None = None,
                   scheme=CirculantScheme.STRANG) -> np.ndarray:
    """Explicit ``R`` or a preconditioned matrix ``P^{-1} R``.

    :param which: one of ``R``, ``DNTB``, ``DNCB``, ``PMHSS``, ``CPMHSS``.
        The circulant variants apply their fast preconditioners column by
        column; the Toeplitz variants use dense LU.

    The fast DNTB/DNCB routines omit the scalar factor ``1/(2 omega)`` of the
    splitting preconditioner. It is restored here (the result is multiplied
    by ``2 omega``) so that the DNTB spectrum is the one whose eigenvalues lie
    in the ``sigma(omega)`` disk about 1.
    """
    which = which.upper()
    if which not in MATRIX_LABELS:
        raise ValueError(f"which must be one of {MATRIX_LABELS}, got {which!r}")
    M = system.M
    _guard(M)
    R = system.to_dense()
    if which == "R":
        return R
    if omega is None:
        raise ValueError(f"{which} needs omega")
    d = system.d
    if which == "DNTB":
        return 2.0 * omega * np.linalg.solve(dense_dntb_matrix(d, system.T, omega), R)
    if which == "PMHSS":
        return np.linalg.solve(dense_pmhss_matrix(d, system.T, omega), R)
    C = circulant_approx(system.T, scheme)
    if which == "DNCB":
        P = build_dncb(d, C, omega)
        return 2.0 * omega * _columnwise(lambda r: apply_dncb(P, r), R)
    P = build_cpmhss(d, C, omega)
    return _columnwise(lambda r: apply_cpmhss(P, r), R)


@dataclass
class SpectrumReport:
    """Eigenvalues of one matrix with summary statistics."""

    matrix_label: str
    eigenvalues: np.ndarray = field(repr=False)
    min_real: float
    max_real: float
    max_abs_imag: float
    disk_radius: float | None = None
    fraction_in_disk: float | None = None

    @property
    def real_part_span(self) -> float:
        """``max Re / min Re`` (orders of magnitude covered by the real parts)."""
        return self.max_real / self.min_real if self.min_real > 0 else math.inf


def preconditioned_spectrum(which: str, system: BlockSystem, omega: float | None = None,
                            radius: float | None = None, scheme=CirculantScheme.STRANG) -> SpectrumReport:
    """Eigenvalues of ``R`` or ``P^{-1} R`` and the fraction inside ``|z - 1| <= radius``.

    For ``DNTB`` the radius defaults to ``sigma(omega)`` from the dense spectra
    of ``D`` and ``T``, the disk that contains every eigenvalue.
    """
    which = which.upper()
    A = dense_assemble(which, system, omega, scheme)
    ev = np.linalg.eigvals(A)
    if not np.all(np.isfinite(ev)):
        raise np.linalg.LinAlgError(f"eigensolver returned non-finite values for {which}")
    if radius is None and which == "DNTB":
        radius = sigma_bound(omega, system.d, np.linalg.eigvalsh(system.T.to_dense()))
    frac = None
    if radius is not None:
        # relative slack for eigenvalues that land on the circle in exact arithmetic
        frac = float(np.mean(np.abs(ev - 1.0) <= radius * (1 + 1e-10) + 1e-12))
    return SpectrumReport(which, ev, float(ev.real.min()), float(ev.real.max()),
                          float(np.abs(ev.imag).max()), radius, frac)


# ---------------------------------------------------------------------------
# Low-rank plus small-norm splitting


@dataclass
class DecompositionReport:
    k0: int
    rank_E: int
    norm_E: float
    norm_F: float
    bound_E: float
    bound_F: float
    identity_error: float

    @property
    def rank_ok(self) -> bool:
        return self.rank_E <= 4 * self.k0

    @property
    def norms_ok(self) -> bool:
        return self.norm_E <= self.bound_E and self.norm_F <= self.bound_F

    @property
    def ok(self) -> bool:
        return self.rank_ok and self.norms_ok and self.identity_error <= 1e-10


def admissible_epsilon(grid: GridSpec) -> tuple[float, float]:
    """Admissible range ``(2^alpha mu theta0/(M-2)^alpha, mu theta0]`` for ``epsilon``."""
    theta0 = bound_constants(grid.alpha).theta0
    top = grid.mu * theta0
    return 2.0 ** grid.alpha * top / (grid.M - 2) ** grid.alpha, top


def decomposition_check(system: BlockSystem, grid: GridSpec, omega: float, epsilon: float,
                        T=None) -> DecompositionReport:
    """Split ``F~^{-1} F - I`` into a low-rank part and a small-norm part.

    ``T - C`` is supported where ``|j - k| >= M/2``. With
    ``k0 = ceil((mu theta0/epsilon)^{1/alpha}) + 1`` the block ``E^`` keeps the
    entries of ``T - C`` in rows ``< M/2`` and columns ``>= M - k0`` together
    with their transpose, and ``F^ = (T - C) - E^``. Multiplying
    ``diag(E^, E^)`` and ``diag(F^, F^)`` by ``[wI + C, -I; I, wI + C]^{-1}``
    gives ``E_wc`` (rank at most ``4 k0``) and ``F_wc`` (norm ``O(epsilon)``).

    :raises ValueError: for odd ``M``, ``M`` outside ``[8, 512]`` or an
        inadmissible ``epsilon``.
    """
    M = grid.M
    if M % 2 or not 8 <= M <= 512:
        raise ValueError(f"decomposition check needs an even M in [8, 512], got {M}")
    lo, hi = admissible_epsilon(grid)
    if not lo < epsilon <= hi * (1 + 1e-12):
        raise ValueError(f"epsilon must lie in ({lo:.6g}, {hi:.6g}], got {epsilon}")
    alpha, mu = grid.alpha, grid.mu
    bc = bound_constants(alpha)
    # the small slack keeps epsilon = mu theta0 from rounding up to k0 = 3
    k0 = math.ceil((mu * bc.theta0 / epsilon) ** (1.0 / alpha) - 1e-12) + 1
    Tm = system.T.to_dense() if T is None else T
    C = circulant_approx(system.T, CirculantScheme.STRANG).to_dense()
    diff = Tm - C
    E_hat = np.zeros_like(diff)
    half = M // 2
    E_hat[:half, M - k0:] = diff[:half, M - k0:]
    E_hat[M - k0:, :half] = diff[M - k0:, :half]
    F_hat = diff - E_hat

    eye = np.eye(M)
    W = omega * eye + C
    Wc = np.block([[W, -eye], [eye, W]])
    Z = np.zeros((M, M))
    E_wc = np.linalg.solve(Wc, np.block([[E_hat, Z], [Z, E_hat]]))
    F_wc = np.linalg.solve(Wc, np.block([[F_hat, Z], [Z, F_hat]]))

    Wt = omega * eye + Tm
    Ft = np.block([[Wt, -eye], [eye, Wt]])
    identity_error = float(np.max(np.abs(np.linalg.solve(Wc, Ft) - np.eye(2 * M) - E_wc - F_wc)))

    sv = np.linalg.svd(E_wc, compute_uv=False)
    rank = int(np.sum(sv > RANK_CUTOFF * sv[0])) if sv[0] > 0 else 0
    norm_E = float(sv[0])
    norm_F = float(np.linalg.norm(F_wc, 2))
    L = grid.length
    denom = math.sqrt(1.0 + (omega + 2.0 ** (alpha + 1) * grid.gamma * grid.tau * bc.theta / L ** alpha) ** 2)
    c0 = central_coefficient(alpha)
    bound_E = math.sqrt(M) * mu * (c0 / 2.0 - bc.theta / (M - 0.5) ** alpha) / denom
    bound_F = math.sqrt(M) * epsilon / denom
    return DecompositionReport(k0, rank, norm_E, norm_F, bound_E, bound_F, identity_error)


# ---------------------------------------------------------------------------
# Eigenvalue and condition-number bounds


@dataclass
class AuditReport:
    """Dense extreme eigenvalues and condition numbers against their analytic bounds."""

    M: int
    alpha: float
    degenerate: bool
    T_extremes: tuple[float, float]
    T_bounds: tuple[float, float]
    kappa_T: float
    kappa_T_bound: float
    C_extremes: tuple[float, float] | None = None
    C_bounds: tuple[float, float] | None = None
    kappa_C: float | None = None
    kappa_C_bound: float | None = None
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def bound_audit(grid: GridSpec) -> AuditReport:
    """Compare the spectrum of ``T`` (and of its Strang circulant for even ``M >= 8``)
    with the analytic eigenvalue and condition-number bounds.

    At ``alpha = 2`` the bounds are vacuous; the report is marked degenerate and
    carries no checks.
    """
    M = grid.M
    _guard(M)
    if M < 4:
        raise ValueError("bound audit needs M >= 4")
    T = build_toeplitz(grid)
    ev = np.linalg.eigvalsh(T.to_dense())
    tb = eigenvalue_bounds(grid, "T")
    rep = AuditReport(M, grid.alpha, tb.degenerate, (ev[0], ev[-1]), (tb.lower, tb.upper),
                      ev[-1] / ev[0], condition_bound(M, grid.alpha, "T"))
    if not tb.degenerate:
        rep.checks["T_lower"] = bool(ev[0] > tb.lower)
        rep.checks["T_upper"] = bool(ev[-1] < tb.upper)
        rep.checks["kappa_T"] = bool(rep.kappa_T <= rep.kappa_T_bound)
    if M >= 8 and M % 2 == 0:
        C = circulant_approx(T, CirculantScheme.STRANG)
        evc = np.sort(C.spectrum.real)
        cb = eigenvalue_bounds(grid, "C")
        rep.C_extremes = (evc[0], evc[-1])
        rep.C_bounds = (cb.lower, cb.upper)
        # at alpha = 2 the circulant Laplacian is singular
        rep.kappa_C = evc[-1] / evc[0] if evc[0] > 0 else math.inf
        rep.kappa_C_bound = condition_bound(M, grid.alpha, "C")
        if not cb.degenerate:
            rep.checks["C_lower"] = bool(evc[0] > cb.lower)
            rep.checks["C_upper"] = bool(evc[-1] < cb.upper)
            rep.checks["kappa_C"] = bool(rep.kappa_C <= rep.kappa_C_bound)
    return rep


def write_eigenvalues_csv(reports, path) -> Path:
    """Write ``label,re,im`` rows for every eigenvalue of every report."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["label", "re", "im"])
        for rep in reports:
            for z in rep.eigenvalues:
                w.writerow([rep.matrix_label, repr(float(z.real)), repr(float(z.imag))])
    return path
