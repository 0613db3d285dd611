"""Left-preconditioned GMRES without restart, and parameter sweeps over it."""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from scipy.linalg import solve_triangular

__all__ = ["SolveReport", "SweepResult", "GMRESBreakdown", "gmres", "omega_sweep", "as_operator"]

log = logging.getLogger(__name__)

#: Arnoldi vectors shorter than this (relative to the column of H) signal breakdown.
BREAKDOWN_TOL = 1e-14
#: The final true residual may exceed ``tol`` by this factor before drift is flagged.
DRIFT_FACTOR = 10.0


class GMRESBreakdown(RuntimeError):
    """Arnoldi broke down before the residual reached the tolerance."""


@dataclass
class SolveReport:
    """Outcome of one GMRES solve.

    ``relative_residuals[k]`` is the preconditioned residual estimate after
    ``k`` iterations divided by ``||P^{-1} b||``; entry 0 is for ``x0``.
    """

    solution: np.ndarray
    iterations: int
    relative_residuals: list = field(repr=False)
    converged: bool
    wall_time: float
    true_relative_residual: float = float("nan")
    drift: bool = False

    @property
    def final_residual(self) -> float:
        return self.relative_residuals[-1]


def as_operator(A) -> Callable[[np.ndarray], np.ndarray]:
    """Wrap a dense array, an object with ``matvec``/``apply``, or a callable."""
    if A is None:
        return lambda v: v
    if isinstance(A, np.ndarray):
        return lambda v: A @ v
    for name in ("matvec", "apply"):
        fn = getattr(A, name, None)
        if callable(fn):
            return fn
    if callable(A):
        return A
    raise TypeError(f"cannot use {type(A).__name__} as a linear operator")


def gmres(A, b, M=None, tol: float = 1e-6, maxit: int = 1000, x0=None) -> SolveReport:
    """Solve ``A x = b`` by GMRES on the left-preconditioned system ``M^{-1} A x = M^{-1} b``.

    Arnoldi uses modified Gram-Schmidt and the least-squares problem is
    updated by Givens rotations. Iteration stops once
    ``||M^{-1}(b - A x_k)|| <= tol ||M^{-1} b||``.

    :param A: system operator (array, object with ``matvec``, or callable).
    :param M: preconditioner applying ``M^{-1}`` (object with ``apply``, or callable).
    :param maxit: maximum number of iterations (Krylov dimension); no restarts.
    :param x0: initial guess, zero by default.
    :raises GMRESBreakdown: on an Arnoldi breakdown with the residual above ``tol``.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if maxit < 1:
        raise ValueError(f"maxit must be at least 1, got {maxit}")
    t0 = time.perf_counter()
    Aop, Pop = as_operator(A), as_operator(M)
    b = np.asarray(b, dtype=float)
    n = len(b)
    x0 = np.zeros(n) if x0 is None else np.array(x0, dtype=float)

    bnorm = np.linalg.norm(Pop(b))
    if bnorm == 0.0:
        return SolveReport(np.zeros(n), 0, [0.0], True, time.perf_counter() - t0, 0.0)
    r0 = Pop(b - Aop(x0)) if np.any(x0) else Pop(b)
    beta = np.linalg.norm(r0)
    hist = [beta / bnorm]
    if hist[0] <= tol:
        return SolveReport(x0, 0, hist, True, time.perf_counter() - t0, hist[0])

    V = [r0 / beta]
    H = np.zeros((maxit + 1, maxit))
    cs = np.zeros(maxit)
    sn = np.zeros(maxit)
    g = np.zeros(maxit + 1)
    g[0] = beta
    converged = False
    k = 0
    for k in range(maxit):
        w = Pop(Aop(V[k]))
        for j in range(k + 1):
            H[j, k] = np.dot(V[j], w)
            w -= H[j, k] * V[j]
        hnext = np.linalg.norm(w)
        H[k + 1, k] = hnext
        for j in range(k):
            t = cs[j] * H[j, k] + sn[j] * H[j + 1, k]
            H[j + 1, k] = -sn[j] * H[j, k] + cs[j] * H[j + 1, k]
            H[j, k] = t
        denom = np.hypot(H[k, k], H[k + 1, k])
        if denom == 0.0:
            raise GMRESBreakdown(f"Krylov space collapsed at iteration {k + 1} (singular operator)")
        cs[k], sn[k] = H[k, k] / denom, H[k + 1, k] / denom
        H[k, k], H[k + 1, k] = denom, 0.0
        g[k + 1] = -sn[k] * g[k]
        g[k] = cs[k] * g[k]
        hist.append(abs(g[k + 1]) / bnorm)
        if hist[-1] <= tol:
            converged = True
            break
        if hnext <= BREAKDOWN_TOL * max(1.0, denom):
            raise GMRESBreakdown(
                f"Arnoldi breakdown at iteration {k + 1} with relative residual {hist[-1]:.3e} > tol {tol:.1e}")
        V.append(w / hnext)
    m = k + 1
    y = solve_triangular(H[:m, :m], g[:m])
    x = x0 + np.asarray(V[:m]).T @ y
    true_res = np.linalg.norm(Pop(b - Aop(x))) / bnorm
    drift = bool(converged and true_res > DRIFT_FACTOR * tol)
    if drift:
        log.warning("GMRES residual drift: estimate %.3e, true %.3e", hist[-1], true_res)
    return SolveReport(x, m, hist, converged, time.perf_counter() - t0, true_res, drift)


@dataclass
class SweepResult:
    """Iteration counts over an ``omega`` grid.

    Points where the preconditioner cannot be built hold ``-1``; points that
    did not converge hold ``maxit + 1``.
    """

    omegas: np.ndarray
    iterations: np.ndarray
    min_iterations: int
    omega_range: tuple[float, float]

    @property
    def omega_best(self) -> float:
        lo, hi = self.omega_range
        k = np.flatnonzero((self.omegas >= lo) & (self.omegas <= hi) & (self.iterations == self.min_iterations))
        return float(self.omegas[k[len(k) // 2]])


def _longest_run(mask: np.ndarray) -> tuple[int, int]:
    best, start, run_start = (0, -1, -1), None, None
    for i, m in enumerate(np.append(mask, False)):
        if m and run_start is None:
            run_start = i
        elif not m and run_start is not None:
            if i - run_start > best[0]:
                best = (i - run_start, run_start, i - 1)
            run_start = None
    return best[1], best[2]


def omega_sweep(system, precond_family: Callable[[float], object], omega_grid: Iterable[float],
                tol: float = 1e-6, maxit: int = 1000, rhs=None, workers: int = 1) -> SweepResult:
    """Run GMRES for every ``omega`` in the grid and locate the best range.

    :param system: the block operator (``rhs`` defaults to ``system.rhs``).
    :param precond_family: maps ``omega`` to a preconditioner; a ``ValueError``
        marks the point as inadmissible.
    :returns: the minimum iteration count and the longest contiguous run of
        grid points attaining it.
    """
    omegas = np.asarray(list(omega_grid), dtype=float)
    if omegas.size == 0:
        raise ValueError("omega grid is empty")
    b = system.rhs if rhs is None else rhs

    def one(w):
        try:
            P = precond_family(w)
        except ValueError:
            return -1
        rep = gmres(system, b, P, tol=tol, maxit=maxit)
        return rep.iterations if rep.converged else maxit + 1

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            its = np.array(list(pool.map(one, omegas)), dtype=int)
    else:
        its = np.array([one(w) for w in omegas], dtype=int)
    valid = its >= 0
    if not valid.any():
        return SweepResult(omegas, its, maxit + 1, (float("nan"), float("nan")))
    best = int(its[valid].min())
    i, j = _longest_run(its == best)
    return SweepResult(omegas, its, best, (float(omegas[i]), float(omegas[j])))
