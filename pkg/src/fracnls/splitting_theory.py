"""Convergence theory of the diagonal / normal-Toeplitz-block (DNTB) splitting.

The real block matrix ``R = [T - D, -I; I, T - D]`` splits as ``R = B + H`` with
``B = diag(-D, -D)`` and ``H = [T, -I; I, T]``. The alternating iteration

    (w I + B) x_half = (w I - H) x + f
    (w I + H) x_next = (w I - B) x_half + f

converges for every ``w > 0`` with spectral radius at most

    sigma(w) = max_lambda |(w + lambda)/(w - lambda)| *
               max_mu sqrt(((w - mu)^2 + 1)/((w + mu)^2 + 1)),

``lambda`` ranging over the eigenvalues of ``D`` and ``mu`` over those of ``T``.
This module evaluates that bound, its interval relaxation ``sigma_hat``, the
parameter minimizing ``sigma_hat``, and the analytic eigenvalue bounds of the
fractional Laplacian and its Strang circulant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .frac_kernel import bound_constants, central_coefficient
from .operators import BlockSystem, GridSpec

__all__ = [
    "SpectralIntervals",
    "OmegaResult",
    "OmegaStar",
    "DNTBResult",
    "EigenvalueBounds",
    "sigma_bound",
    "sigma_hat",
    "sigma_factors",
    "omega_star1",
    "omega_star2",
    "g_ratio",
    "quartic_coefficients",
    "optimal_omega",
    "dntb_iterate",
    "eigenvalue_bounds",
    "condition_bound",
]

#: Roots this close to an interval endpoint are treated as interior.
ROOT_SLACK = 1e-12


@dataclass(frozen=True)
class SpectralIntervals:
    """Bounds ``lambda_min <= lambda_max <= 0`` for ``D`` and ``0 < mu_min <= mu_max`` for ``T``."""

    lambda_min: float
    lambda_max: float
    mu_min: float
    mu_max: float

    def __post_init__(self):
        if not self.lambda_min <= self.lambda_max <= 0.0:
            raise ValueError(
                f"need lambda_min <= lambda_max <= 0, got {self.lambda_min}, {self.lambda_max}")
        if not 0.0 < self.mu_min <= self.mu_max:
            raise ValueError(f"need 0 < mu_min <= mu_max, got {self.mu_min}, {self.mu_max}")

    @classmethod
    def from_spectra(cls, d_spectrum, t_spectrum) -> "SpectralIntervals":
        d = np.asarray(d_spectrum, dtype=float)
        t = np.asarray(t_spectrum, dtype=float)
        return cls(float(d.min()), float(d.max()), float(t.min()), float(t.max()))


def _check_omega(omega: float) -> float:
    omega = float(omega)
    if not omega > 0:
        raise ValueError(f"omega must be positive, got {omega}")
    return omega


def _lambda_factor(omega, lam):
    lam = np.asarray(lam, dtype=float)
    return np.abs((omega + lam) / (omega - lam))


def _mu_factor(omega, mu):
    mu = np.asarray(mu, dtype=float)
    return np.sqrt(((omega - mu) ** 2 + 1.0) / ((omega + mu) ** 2 + 1.0))


def sigma_bound(omega: float, d_spectrum, t_spectrum) -> float:
    """Bound ``sigma(omega)`` on the spectral radius of the DNTB iteration.

    :param d_spectrum: eigenvalues of ``D`` (all ``<= 0``).
    :param t_spectrum: eigenvalues of ``T`` (all ``> 0``).
    """
    omega = _check_omega(omega)
    d = np.asarray(d_spectrum, dtype=float)
    t = np.asarray(t_spectrum, dtype=float)
    if np.any(d > 0):
        raise ValueError("diagonal spectrum must be non-positive")
    if np.any(t <= 0):
        raise ValueError("Toeplitz spectrum must be positive")
    return float(np.max(_lambda_factor(omega, d)) * np.max(_mu_factor(omega, t)))


def sigma_factors(omega: float, iv: SpectralIntervals) -> tuple[float, float]:
    """The two factors ``(sigma_1, sigma_2)`` of :func:`sigma_hat`.

    ``|(w + l)/(w - l)|`` is monotone in ``l <= 0``, so ``sigma_1`` is attained
    at an endpoint. The ``mu`` factor is attained at ``mu_min`` when
    ``mu_min * mu_max <= 1`` and at one of the endpoints otherwise.
    """
    omega = _check_omega(omega)
    s1 = float(np.max(_lambda_factor(omega, [iv.lambda_min, iv.lambda_max])))
    if iv.mu_min * iv.mu_max > 1.0:
        s2 = float(np.max(_mu_factor(omega, [iv.mu_min, iv.mu_max])))
    else:
        s2 = float(_mu_factor(omega, iv.mu_min))
    return s1, s2


def sigma_hat(omega: float, iv: SpectralIntervals) -> float:
    """Interval relaxation ``sigma_hat = sigma_1 * sigma_2`` of :func:`sigma_bound`."""
    s1, s2 = sigma_factors(omega, iv)
    return s1 * s2


class OmegaStar(NamedTuple):
    omega: float
    sigma: float
    degenerate: bool = False


def omega_star1(iv: SpectralIntervals) -> OmegaStar:
    """Minimizer ``sqrt(lambda_min lambda_max)`` of the diagonal factor.

    When ``lambda_min == 0`` the factor is identically one and the result is
    flagged degenerate (``omega = nan``).
    """
    if iv.lambda_min == 0.0:
        return OmegaStar(math.nan, 1.0, True)
    if iv.lambda_max == 0.0:
        # the factor equals one for every omega; any value minimizes it
        return OmegaStar(0.0, 1.0, True)
    a, b = math.sqrt(-iv.lambda_min), math.sqrt(-iv.lambda_max)
    return OmegaStar(a * b, (a - b) / (a + b))


def omega_star2(iv: SpectralIntervals) -> OmegaStar:
    """Closed-form minimizer of the ``mu`` factor and its value there.

    ``sqrt(mu_min mu_max - 1)`` when ``mu_min mu_max > 1``, otherwise
    ``sqrt(mu_min^2 + 1)``.
    """
    lo, hi = iv.mu_min, iv.mu_max
    if lo * hi > 1.0:
        w = math.sqrt(lo * hi - 1.0)
        return OmegaStar(w, math.sqrt((lo + hi - 2.0 * w) / (lo + hi + 2.0 * w)))
    w = math.sqrt(lo * lo + 1.0)
    return OmegaStar(w, math.sqrt((w - lo) / (w + lo)))


def g_ratio(lam: float, mu: float, omega):
    """``g(lambda, mu; omega) = (w + l)/(w - l) * sqrt(((w - m)^2 + 1)/((w + m)^2 + 1))``."""
    omega = np.asarray(omega, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(omega == lam, 1.0, (omega + lam) / (omega - lam))
    return ratio * _mu_factor(omega, mu)


def quartic_coefficients(lam: float, mu: float) -> tuple[float, float, float]:
    """Coefficients ``(Upsilon, Theta, Xi)`` of ``Upsilon w^4 + Theta w^2 + Xi = 0``.

    The positive roots are the stationary points of ``g(lam, mu; w)``.
    """
    upsilon = mu - lam
    theta = 2.0 * lam * (mu * mu - 1.0) - mu * (mu * mu + lam * lam + 1.0)
    xi = lam * (mu * mu + 1.0) * (lam * mu - mu * mu - 1.0)
    return upsilon, theta, xi


def _stationary_points(lam, mu, lo, hi) -> list[float]:
    ups, th, xi = quartic_coefficients(lam, mu)
    disc = th * th - 4.0 * ups * xi
    if disc < 0 or ups == 0:
        return []
    sq = math.sqrt(disc)
    # numerically stable quadratic formula in s = w^2
    q = -0.5 * (th + math.copysign(sq, th)) if th != 0 else 0.5 * sq
    roots = []
    if q != 0:
        roots += [q / ups, xi / q]
    else:
        roots += [0.0]
    slack = ROOT_SLACK * max(1.0, hi)
    out = []
    for s in roots:
        if s > 0:
            w = math.sqrt(s)
            if lo - slack <= w <= hi + slack:
                out.append(min(max(w, lo), hi))
    return out


def _minimize_g(sign, lam, mu, lo, hi):
    lo = max(lo, np.finfo(float).tiny)
    cand = [lo, hi] + _stationary_points(lam, mu, lo, hi)
    vals = [sign * float(g_ratio(lam, mu, w)) for w in cand]
    k = int(np.argmin(vals))
    return cand[k]


@dataclass(frozen=True)
class OmegaResult:
    """Optimal parameter of ``sigma_hat`` with the case that produced it."""

    omega_opt: float
    sigma_hat_at_opt: float
    branch: str
    candidates: tuple[float, ...] = ()


def optimal_omega(iv: SpectralIntervals) -> OmegaResult:
    """Minimize :func:`sigma_hat` by the six-way case analysis.

    With ``l* = sqrt(lambda_min lambda_max)``, ``m~ = sqrt(mu_min mu_max - 1)``
    and ``m^ = sqrt(mu_min^2 + 1)``, and
    ``g1 = g(lambda_max, mu_max)``, ``g2 = g(lambda_max, mu_min)``,
    ``g3 = -g(lambda_min, mu_min)``, the minimizer is the minimizer of the
    designated ``g_i`` over the designated interval:

    ======  ==========================================  ==================
    case    condition                                   problem
    ======  ==========================================  ==================
    (a)     mu_min mu_max > 1, l* < m~ < m^             best of g1 on [l*, m~] and g2 on [m~, m^]
    (b)     mu_min mu_max > 1, l* < m~, m~ >= m^        g1 on [l*, m~]
    (c)     mu_min mu_max > 1, l* >= m~ >= m^           g3 on [m~, l*]
    (d1)    mu_min mu_max > 1, m~ <= l* < m^            g2 on [l*, m^]
    (d2)    mu_min mu_max > 1, m~ < m^ <= l*            g3 on [m^, l*]
    (e)     mu_min mu_max <= 1, l* < m^                 g2 on [l*, m^]
    (f)     mu_min mu_max <= 1, l* >= m^                g3 on [m^, l*]
    ======  ==========================================  ==================

    Each one-dimensional problem compares ``g_i`` at the interval endpoints and
    at the stationary points inside it, found as the positive roots of the
    quartic of :func:`quartic_coefficients`.
    """
    lmin, lmax, mmin, mmax = iv.lambda_min, iv.lambda_max, iv.mu_min, iv.mu_max
    # split the square root so tiny eigenvalues do not underflow
    lstar = math.sqrt(-lmin) * math.sqrt(-lmax)
    mhat = math.sqrt(mmin * mmin + 1.0)
    g1 = (1.0, lmax, mmax)
    g2 = (1.0, lmax, mmin)
    g3 = (-1.0, lmin, mmin)

    def solve(g, lo, hi):
        return _minimize_g(*g, lo, hi)

    if mmin * mmax > 1.0:
        mtil = math.sqrt(mmin * mmax - 1.0)
        if lstar < mtil and mtil < mhat:
            branch = "(a)"
            cands = (solve(g1, lstar, mtil), solve(g2, mtil, mhat))
            w = min(cands, key=lambda c: sigma_hat(c, iv))
        elif lstar < mtil:
            branch, w = "(b)", solve(g1, lstar, mtil)
            cands = (w,)
        elif mtil >= mhat:
            branch, w = "(c)", solve(g3, mtil, lstar)
            cands = (w,)
        elif lstar < mhat:
            branch, w = "(d1)", solve(g2, lstar, mhat)
            cands = (w,)
        else:
            branch, w = "(d2)", solve(g3, mhat, lstar)
            cands = (w,)
    elif lstar < mhat:
        branch, w = "(e)", solve(g2, lstar, mhat)
        cands = (w,)
    else:
        branch, w = "(f)", solve(g3, mhat, lstar)
        cands = (w,)
    return OmegaResult(w, sigma_hat(w, iv), branch, cands)


# ---------------------------------------------------------------------------
# Stationary iteration


class DNTBResult(NamedTuple):
    x: np.ndarray
    iterations: int
    residual_history: list
    converged: bool


def dntb_iterate(sys: BlockSystem, omega: float, x0=None, tol: float = 1e-10,
                 maxit: int = 500, rhs=None) -> DNTBResult:
    """Run the alternating DNTB iteration on ``R x = f``.

    A dense reference implementation for small ``M``: the ``H`` half-step
    diagonalizes ``T`` once and solves the 2-by-2 block system per eigenvalue.
    Iterates until ``||f - R x||/||f|| <= tol``.

    :param rhs: right-hand side; defaults to ``sys.rhs``.
    :returns: a :class:`DNTBResult`; ``converged`` is false when ``maxit`` is hit.
    """
    omega = _check_omega(omega)
    M = sys.M
    f = np.asarray(sys.rhs if rhs is None else rhs, dtype=float)
    if f.shape != (2 * M,):
        raise ValueError(f"rhs must have length {2 * M}")
    x = np.zeros(2 * M) if x0 is None else np.array(x0, dtype=float)
    d = sys.d
    evals, Q = np.linalg.eigh(sys.T.to_dense())
    s = omega + evals
    det = s * s + 1.0
    R = sys.to_dense()

    def solve_h(r):
        a, b = Q.T @ r[:M], Q.T @ r[M:]
        # [s, -1; 1, s]^{-1} = [s, 1; -1, s] / (s^2 + 1)
        return np.concatenate([Q @ ((s * a + b) / det), Q @ ((s * b - a) / det)])

    def apply_h(v):
        K = sys.T.matvec(v.reshape(2, M))
        return np.concatenate([K[0] - v[M:], v[:M] + K[1]])

    dd = np.concatenate([d, d])
    fnorm = np.linalg.norm(f)
    if fnorm == 0:
        return DNTBResult(np.zeros(2 * M), 0, [0.0], True)
    hist = [np.linalg.norm(f - R @ x) / fnorm]
    for k in range(1, maxit + 1):
        half = (omega * x - apply_h(x) + f) / (omega - dd)
        x = solve_h(omega * half + dd * half + f)
        hist.append(np.linalg.norm(f - R @ x) / fnorm)
        if hist[-1] <= tol:
            return DNTBResult(x, k, hist, True)
    return DNTBResult(x, maxit, hist, False)


# ---------------------------------------------------------------------------
# Analytic eigenvalue bounds


class EigenvalueBounds(NamedTuple):
    lower: float
    upper: float
    degenerate: bool


def eigenvalue_bounds(grid: GridSpec, which: str = "T") -> EigenvalueBounds:
    """Open interval containing every eigenvalue of ``T`` or its Strang circulant ``C``.

    ``T``: ``(2 gamma tau theta/(b-a)^alpha, 2 mu [c_0 - theta h^alpha/(b-a)^alpha])``
    for ``M >= 4``. ``C``: the lower end scaled by ``2^alpha`` and ``theta``
    replaced by ``2^alpha theta`` in the upper end, for even ``M >= 8``.

    :raises ValueError: below the size threshold or for odd ``M`` with ``C``.
    """
    which = which.upper()
    alpha, M = grid.alpha, grid.M
    if which == "T":
        if M < 4:
            raise ValueError("Toeplitz eigenvalue bounds need M >= 4")
        scale = 1.0
    elif which == "C":
        if M < 8 or M % 2:
            raise ValueError("circulant eigenvalue bounds need an even M >= 8")
        scale = 2.0 ** alpha
    else:
        raise ValueError(f"which must be 'T' or 'C', got {which!r}")
    bc = bound_constants(alpha)
    L = grid.length
    lower = 2.0 * grid.gamma * grid.tau * scale * bc.theta / L ** alpha
    upper = 2.0 * grid.mu * (central_coefficient(alpha) - scale * bc.theta * grid.h ** alpha / L ** alpha)
    return EigenvalueBounds(lower, upper, bc.degenerate)


def condition_bound(M: int, alpha: float, which: str = "T") -> float:
    """Upper bound ``(M+1)^alpha c_0 / (s theta) - 1`` on the condition number.

    ``s = 1`` for ``T`` and ``2^alpha`` for ``C``. Infinite when ``alpha = 2``.
    """
    which = which.upper()
    if which not in ("T", "C"):
        raise ValueError(f"which must be 'T' or 'C', got {which!r}")
    bc = bound_constants(alpha)
    if bc.degenerate:
        return math.inf
    s = 1.0 if which == "T" else 2.0 ** alpha
    return (M + 1) ** alpha * central_coefficient(alpha) / (s * bc.theta) - 1.0
