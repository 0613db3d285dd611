"""Fast preconditioners for the real block system ``R = [T - D, -I; I, T - D]``.

Both preconditioners replace ``T`` by a circulant ``C = F* diag(Lambda) F`` so
that every block becomes diagonal in Fourier space. A single application
costs four transforms of length ``M``.

``DNCB``
    ``(w I - D) [w I + C, -I; I, w I + C]`` (block diagonal times normal
    circulant block), the scalar factor ``1/(2w)`` dropped.
``CPMHSS``
    ``[I, -I; I, I] diag(w I + C, w I + C) diag(Dh, Dh)`` up to scaling, with
    ``Dh = (w I + D)^{-1}((w + 1) I + D)``; needs ``w > ||D||_inf``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import CirculantOperator, SingularityError, ToeplitzOperator, _real_part, fft, ifft

__all__ = [
    "DNCBPreconditioner",
    "CPMHSSPreconditioner",
    "build_dncb",
    "apply_dncb",
    "build_cpmhss",
    "apply_cpmhss",
    "dense_dntb_apply",
    "dense_dncb_matrix",
    "dense_cpmhss_matrix",
    "dense_dntb_matrix",
    "dense_pmhss_matrix",
    "DENSE_LIMIT",
]

#: Largest ``M`` accepted by the dense reference routines.
DENSE_LIMIT = 1024


def _frozen(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


def _check_shift(shifted, spectrum):
    scale = max(np.max(np.abs(spectrum), initial=0.0), 1.0)
    if np.min(np.abs(shifted)) < 1e-14 * scale:
        raise SingularityError("omega + Lambda has a numerically zero entry")


@dataclass(frozen=True, eq=False)
class DNCBPreconditioner:
    """Precomputed diagonals of the DNCB factorization.

    ``[w + C, -I; I, w + C]`` is block-LU factored in Fourier space as
    ``[U11, 0; L21 U11, U22]``-type diagonals with ``U11 = w + Lambda``,
    ``L21 = 1/U11`` and ``U22 = U11 + L21``.
    """

    omega: float
    d_tilde: np.ndarray
    U11_spectrum: np.ndarray
    L21_spectrum: np.ndarray
    U22_spectrum: np.ndarray

    @property
    def M(self) -> int:
        return len(self.d_tilde)

    def apply(self, r: np.ndarray) -> np.ndarray:
        return apply_dncb(self, r)

    __call__ = apply


def build_dncb(d, C: CirculantOperator, omega: float) -> DNCBPreconditioner:
    """Precompute the DNCB preconditioner for ``D = diag(d) <= 0`` and circulant ``C``.

    :raises ValueError: if ``omega <= 0`` or some ``omega - d_j <= 0``.
    :raises SingularityError: if ``omega + Lambda`` has a numerically zero entry.
    """
    omega = float(omega)
    if not omega > 0:
        raise ValueError(f"omega must be positive, got {omega}")
    d = np.asarray(d, dtype=float)
    if len(d) != C.M:
        raise ValueError(f"diagonal has length {len(d)}, circulant has size {C.M}")
    d_tilde = omega - d
    if np.any(d_tilde <= 0):
        raise ValueError("omega - d must be positive; the diagonal should be non-positive")
    U11 = omega + C.spectrum
    _check_shift(U11, C.spectrum)
    L21 = 1.0 / U11
    return DNCBPreconditioner(omega, _frozen(d_tilde), _frozen(U11), _frozen(L21), _frozen(U11 + L21))


def apply_dncb(P: DNCBPreconditioner, r: np.ndarray) -> np.ndarray:
    """Solve ``F_DNCB x = r``.

    Steps: divide both halves by ``w - d``; transform; ``x2 -= L21 x1``;
    ``x2 /= U22``; ``x1 = (x1 + x2)/U11``; inverse transform.
    """
    r = np.asarray(r, dtype=float)
    M = P.M
    if r.shape != (2 * M,):
        raise ValueError(f"expected a vector of length {2 * M}, got shape {r.shape}")
    y = fft(r.reshape(2, M) / P.d_tilde)
    y[1] -= P.L21_spectrum * y[0]
    y[1] /= P.U22_spectrum
    y[0] = (y[0] + y[1]) / P.U11_spectrum
    return _real_part(ifft(y)).reshape(-1)


@dataclass(frozen=True, eq=False)
class CPMHSSPreconditioner:
    """Precomputed diagonals of the circulant PMHSS preconditioner."""

    omega: float
    d_hat: np.ndarray
    lambda_hat_spectrum: np.ndarray

    @property
    def M(self) -> int:
        return len(self.d_hat)

    def apply(self, r: np.ndarray) -> np.ndarray:
        return apply_cpmhss(self, r)

    __call__ = apply


def build_cpmhss(d, C: CirculantOperator, omega: float) -> CPMHSSPreconditioner:
    """Precompute the CPMHSS preconditioner.

    :raises ValueError: unless ``omega > ||D||_inf``.
    """
    omega = float(omega)
    d = np.asarray(d, dtype=float)
    if len(d) != C.M:
        raise ValueError(f"diagonal has length {len(d)}, circulant has size {C.M}")
    dnorm = float(np.max(np.abs(d), initial=0.0))
    if not omega > dnorm:
        raise ValueError(f"CPMHSS needs omega > ||D||_inf = {dnorm:.6g}, got {omega}")
    lam_hat = omega + C.spectrum
    _check_shift(lam_hat, C.spectrum)
    d_hat = (omega + 1.0 + d) / (omega + d)
    return CPMHSSPreconditioner(omega, _frozen(d_hat), _frozen(lam_hat))


def apply_cpmhss(P: CPMHSSPreconditioner, r: np.ndarray) -> np.ndarray:
    """Solve ``F_CPMHSS x = r``.

    Steps: ``x1 = r1 + r2``, ``x2 = r2 - r1``; transform; divide by
    ``w + Lambda``; inverse transform; divide by ``Dh``.
    """
    r = np.asarray(r, dtype=float)
    M = P.M
    if r.shape != (2 * M,):
        raise ValueError(f"expected a vector of length {2 * M}, got shape {r.shape}")
    r1, r2 = r[:M], r[M:]
    y = fft(np.stack([r1 + r2, r2 - r1])) / P.lambda_hat_spectrum
    return (_real_part(ifft(y)) / P.d_hat).reshape(-1)


# ---------------------------------------------------------------------------
# Dense references


def _guard(M):
    if M > DENSE_LIMIT:
        raise ValueError(f"dense preconditioner routines are limited to M <= {DENSE_LIMIT}, got {M}")


def _normal_block(K: np.ndarray, omega: float) -> np.ndarray:
    M = len(K)
    W = omega * np.eye(M) + K
    eye = np.eye(M)
    return np.block([[W, -eye], [eye, W]])


def dense_dntb_matrix(d, T, omega: float) -> np.ndarray:
    """Dense ``diag(wI - D, wI - D) [wI + T, -I; I, wI + T]``.

    ``T`` may be any operator with ``to_dense`` (a circulant gives the DNCB matrix).
    """
    d = np.asarray(d, dtype=float)
    _guard(len(d))
    Td = T.to_dense() if hasattr(T, "to_dense") else np.asarray(T, dtype=float)
    dt = np.concatenate([omega - d, omega - d])
    return dt[:, None] * _normal_block(Td, omega)


def dense_dncb_matrix(d, C: CirculantOperator, omega: float) -> np.ndarray:
    return dense_dntb_matrix(d, C, omega)


def dense_pmhss_matrix(d, T, omega: float) -> np.ndarray:
    """Dense ``[I, -I; I, I] diag(wI + T, wI + T) diag(Dh, Dh)``, ``Dh = (w+D)^{-1}(w+1+D)``.

    With a circulant in place of ``T`` this is the CPMHSS matrix that
    :func:`apply_cpmhss` inverts.
    """
    d = np.asarray(d, dtype=float)
    M = len(d)
    _guard(M)
    Td = T.to_dense() if hasattr(T, "to_dense") else np.asarray(T, dtype=float)
    W = omega * np.eye(M) + Td
    dh = (omega + 1.0 + d) / (omega + d)
    eye = np.eye(M)
    Z = np.zeros((M, M))
    J = np.block([[eye, -eye], [eye, eye]])
    return J @ np.block([[W, Z], [Z, W]]) @ np.diag(np.concatenate([dh, dh])) / 2.0


def dense_cpmhss_matrix(d, C: CirculantOperator, omega: float) -> np.ndarray:
    return dense_pmhss_matrix(d, C, omega)


def dense_dntb_apply(d, T: ToeplitzOperator, omega: float, r: np.ndarray) -> np.ndarray:
    """Solve the dense DNTB system ``F_DNTB x = r`` by LU (reference only, ``M <= 1024``)."""
    F = dense_dntb_matrix(d, T, omega)
    return np.linalg.solve(F, np.asarray(r, dtype=float))
