"""Fractional centered-difference coefficients and their analytic bounds.

The coefficients

    c_k = (-1)^k Gamma(alpha + 1) / [Gamma(alpha/2 - k + 1) Gamma(alpha/2 + k + 1)]

discretize the one-dimensional fractional Laplacian of order ``alpha`` on a
uniform grid. They are generated here by the ratio recurrence

    c_{k+1} = c_k (k - alpha/2) / (k + 1 + alpha/2),

which avoids the poles and overflow of the Gamma function for large ``k``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln

__all__ = [
    "CoefficientTable",
    "BoundConstants",
    "check_alpha",
    "central_coefficient",
    "compute_coefficients",
    "tail_bounds",
    "bound_constants",
]


def check_alpha(alpha: float) -> float:
    """Validate a fractional order, returning it as a float.

    :raises ValueError: unless ``1 < alpha <= 2``.
    """
    alpha = float(alpha)
    if not (1.0 < alpha <= 2.0):
        raise ValueError(f"fractional order must satisfy 1 < alpha <= 2, got {alpha!r}")
    return alpha


def central_coefficient(alpha: float) -> float:
    """``c_0 = Gamma(alpha+1) / Gamma(alpha/2+1)^2``, evaluated in log space."""
    alpha = check_alpha(alpha)
    return math.exp(gammaln(alpha + 1.0) - 2.0 * gammaln(alpha / 2.0 + 1.0))


@dataclass(frozen=True)
class CoefficientTable:
    """Immutable table ``c_0 ... c_{n-1}`` for one fractional order."""

    alpha: float
    coeffs: np.ndarray

    def __len__(self) -> int:
        return len(self.coeffs)

    def __getitem__(self, k):
        return self.coeffs[k]


def compute_coefficients(alpha: float, n: int) -> CoefficientTable:
    """Return the first ``n`` centered-difference coefficients.

    :param alpha: fractional order in ``(1, 2]``.
    :param n: number of coefficients, at least 1.
    :raises ValueError: on an invalid order or ``n < 1``.
    """
    alpha = check_alpha(alpha)
    n = int(n)
    if n < 1:
        raise ValueError(f"need at least one coefficient, got n={n}")
    c = np.empty(n)
    c[0] = central_coefficient(alpha)
    if n > 1:
        k = np.arange(n - 1, dtype=float)
        ratios = (k - alpha / 2.0) / (k + 1.0 + alpha / 2.0)
        c[1:] = c[0] * np.cumprod(ratios)
    c.setflags(write=False)
    return CoefficientTable(alpha, c)


def _sine_factor(alpha: float) -> float:
    # sin(pi) is not exactly zero in floating point
    if alpha == 2.0:
        return 0.0
    return math.sin(math.pi * alpha / 2.0)


def _lower_prefactor(alpha: float) -> float:
    s = 5.0 + alpha / 2.0
    return (1.0 - (1.0 + alpha) / s) ** s * math.exp(alpha + 1.0)


def tail_bounds(alpha: float, k0: int) -> tuple[float, float]:
    """Lower and upper bounds on ``sum_{j > k0} |c_j|``.

    Both bounds decay like ``k0**(-alpha)`` and vanish at ``alpha = 2``.

    :raises ValueError: if ``k0 < 3``.
    """
    alpha = check_alpha(alpha)
    if k0 < 3:
        raise ValueError(f"tail bounds need k0 >= 3, got {k0}")
    common = math.gamma(alpha + 1.0) * _sine_factor(alpha) / (math.pi * alpha)
    lower = _lower_prefactor(alpha) * common / (k0 + 0.5) ** alpha
    upper = math.sqrt(2.0) * math.exp(13.0 / 12.0) * common / (k0 - 1.0) ** alpha
    return lower, upper


class BoundConstants(NamedTuple):
    theta: float
    theta0: float
    degenerate: bool


def bound_constants(alpha: float) -> BoundConstants:
    """Constants ``theta`` (lower) and ``theta0`` (upper) of the tail estimates.

    ``tail_bounds(alpha, k0) == (theta / (k0 + 1/2)**alpha, theta0 / (k0 - 1)**alpha)``.
    At ``alpha = 2`` both vanish and the result is flagged ``degenerate``.
    """
    alpha = check_alpha(alpha)
    common = math.gamma(alpha + 1.0) * _sine_factor(alpha) / (math.pi * alpha)
    theta = _lower_prefactor(alpha) * common
    theta0 = math.sqrt(2.0) * math.exp(13.0 / 12.0) * common
    return BoundConstants(theta, theta0, degenerate=(theta == 0.0))
