"""Structured operators for the discrete fractional Laplacian.

Transform convention: the forward transform uses the kernel
``exp(-2 pi i j k / M)`` without normalization and the inverse carries the
``1/M`` factor, i.e. :func:`scipy.fft.fft` / :func:`scipy.fft.ifft`.
A circulant with first column ``c`` then has eigenvalues ``fft(c)``.

All transforms issued by this package go through :func:`fft` and
:func:`ifft` below so that :data:`transform_counter` can audit operation
counts.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .frac_kernel import CoefficientTable, check_alpha, compute_coefficients

__all__ = [
    "GridSpec",
    "ToeplitzOperator",
    "CirculantScheme",
    "CirculantOperator",
    "BlockSystem",
    "SingularityError",
    "TransformCounter",
    "transform_counter",
    "fft",
    "ifft",
    "build_toeplitz",
    "toeplitz_matvec",
    "circulant_approx",
    "circulant_solve",
    "block_matvec",
    "complex_to_block",
    "block_to_complex",
]

#: Relative bound on the imaginary residue tolerated after an inverse transform.
IMAG_RESIDUE_TOL = 1e-10


class SingularityError(ArithmeticError):
    """A shifted circulant spectrum has an entry that is numerically zero."""


class TransformCounter:
    """Counts the length-M transforms issued through :func:`fft`/:func:`ifft`.

    A batched call on an array of shape ``(k, M)`` counts as ``k`` transforms.
    """

    def __init__(self):
        self.count = 0

    def reset(self) -> None:
        self.count = 0


transform_counter = TransformCounter()


def _batch(x) -> int:
    return int(np.prod(np.shape(x)[:-1], dtype=int))


def fft(x, n=None):
    transform_counter.count += _batch(x)
    return sfft.fft(x, n=n, axis=-1)


def ifft(x, n=None):
    transform_counter.count += _batch(x)
    return sfft.ifft(x, n=n, axis=-1)


def _real_part(z, scale=None):
    """Real part of ``z``; under ``__debug__`` assert the imaginary part is round-off."""
    if __debug__:
        ref = np.max(np.abs(z.real), initial=0.0) if scale is None else scale
        resid = np.max(np.abs(z.imag), initial=0.0)
        assert resid <= IMAG_RESIDUE_TOL * max(ref, 1.0), (
            f"imaginary residue {resid:.3e} is not round-off")
    return np.ascontiguousarray(z.real)


# ---------------------------------------------------------------------------
# Grid


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on ``[a, b]`` with ``M`` inner points and time step ``tau``.

    ``h = (b - a)/(M + 1)`` and ``mu = gamma * tau / h**alpha``.
    """

    a: float
    b: float
    M: int
    tau: float
    gamma: float
    alpha: float

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError(f"need b > a, got a={self.a}, b={self.b}")
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        object.__setattr__(self, "alpha", check_alpha(self.alpha))
        object.__setattr__(self, "M", int(self.M))

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def h(self) -> float:
        return (self.b - self.a) / (self.M + 1)

    @property
    def mu(self) -> float:
        return self.gamma * self.tau / self.h ** self.alpha

    @property
    def x(self) -> np.ndarray:
        """Inner grid points ``x_1 ... x_M``."""
        return self.a + self.h * np.arange(1, self.M + 1)


# ---------------------------------------------------------------------------
# Toeplitz


def _embedding_spectrum(col: np.ndarray) -> tuple[int, np.ndarray]:
    M = len(col)
    L = sfft.next_fast_len(2 * M, real=True)
    emb = np.zeros(L)
    emb[:M] = col
    if M > 1:
        emb[L - M + 1:] = col[1:][::-1]
    return L, sfft.rfft(emb)


@dataclass(frozen=True, eq=False)
class ToeplitzOperator:
    """Symmetric Toeplitz matrix given by its first column.

    The matrix-vector product embeds the matrix in a circulant of length
    ``L >= 2M`` (smallest 5-smooth length; zeros fill the wrap gap), so a
    product costs two real transforms of length ``L``.
    """

    first_column: np.ndarray
    embedding_length: int = field(init=False)
    embedded_spectrum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        col = np.array(self.first_column, dtype=float)
        if col.ndim != 1 or len(col) < 1:
            raise ValueError("first column must be a non-empty 1-D array")
        col.setflags(write=False)
        L, spec = _embedding_spectrum(col)
        spec.setflags(write=False)
        object.__setattr__(self, "first_column", col)
        object.__setattr__(self, "embedding_length", L)
        object.__setattr__(self, "embedded_spectrum", spec)

    @property
    def M(self) -> int:
        return len(self.first_column)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.M, self.M)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """``T @ x`` along the last axis; real or complex, single or batched."""
        x = np.asarray(x)
        if x.shape[-1] != self.M:
            raise ValueError(f"expected trailing dimension {self.M}, got {x.shape[-1]}")
        if np.iscomplexobj(x):
            return self.matvec(x.real) + 1j * self.matvec(x.imag)
        L = self.embedding_length
        y = sfft.irfft(self.embedded_spectrum * sfft.rfft(x, n=L, axis=-1), n=L, axis=-1)
        return y[..., : self.M]

    __matmul__ = matvec

    def diagonal(self) -> np.ndarray:
        return np.full(self.M, self.first_column[0])

    def to_dense(self) -> np.ndarray:
        idx = np.arange(self.M)
        return self.first_column[np.abs(idx[:, None] - idx[None, :])]


def build_toeplitz(grid: GridSpec, coeffs: CoefficientTable | None = None) -> ToeplitzOperator:
    """Toeplitz ``T`` with entries ``mu * c_|j-k|`` on the given grid.

    :param coeffs: coefficient table of length at least ``M``; computed when omitted.
    :raises ValueError: if the table is too short or built for another order.
    """
    if coeffs is None:
        coeffs = compute_coefficients(grid.alpha, grid.M)
    if len(coeffs) < grid.M:
        raise ValueError(f"coefficient table has {len(coeffs)} entries, need {grid.M}")
    if coeffs.alpha != grid.alpha:
        raise ValueError(f"table order {coeffs.alpha} does not match grid order {grid.alpha}")
    return ToeplitzOperator(grid.mu * np.asarray(coeffs.coeffs[: grid.M]))


def toeplitz_matvec(T: ToeplitzOperator, x: np.ndarray) -> np.ndarray:
    """Functional form of :meth:`ToeplitzOperator.matvec`."""
    x = np.asarray(x)
    if x.ndim != 1 or len(x) != T.M:
        raise ValueError(f"expected a vector of length {T.M}, got shape {x.shape}")
    return T.matvec(x)


# ---------------------------------------------------------------------------
# Circulants


class CirculantScheme(str, enum.Enum):
    STRANG = "strang"
    TCHAN = "tchan"
    RCHAN = "rchan"
    MODIFIED_DIRICHLET = "modified_dirichlet"
    VON_HANN = "von_hann"
    HAMMING = "hamming"
    SUPEROPTIMAL = "superoptimal"

    @classmethod
    def parse(cls, value) -> "CirculantScheme":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace(".", "").replace("-", "_").replace(" ", "_")
        aliases = {"t_chan": "tchan", "r_chan": "rchan", "vonhann": "von_hann",
                   "hann": "von_hann", "moddirichlet": "modified_dirichlet",
                   "dirichlet": "modified_dirichlet", "super": "superoptimal"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            names = ", ".join(s.value for s in cls)
            raise ValueError(f"unknown circulant scheme {value!r}; choose from {names}") from None


@dataclass(frozen=True, eq=False)
class CirculantOperator:
    """Circulant matrix held by its first column and its eigenvalues ``fft(col)``."""

    first_column: np.ndarray
    scheme: CirculantScheme | None = None
    spectrum: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        col = np.array(self.first_column, dtype=float)
        col.setflags(write=False)
        object.__setattr__(self, "first_column", col)
        spec = self.spectrum
        if spec is None:
            spec = fft(col)
        spec = np.array(spec, dtype=complex)
        spec.setflags(write=False)
        object.__setattr__(self, "spectrum", spec)

    @property
    def M(self) -> int:
        return len(self.first_column)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.M, self.M)

    @cached_property
    def real_spectrum(self) -> np.ndarray:
        """Eigenvalues as reals (the spectrum of a symmetric circulant)."""
        return self.spectrum.real.copy()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        y = ifft(self.spectrum * fft(x))
        return y if np.iscomplexobj(x) else _real_part(y)

    __matmul__ = matvec

    def to_dense(self) -> np.ndarray:
        idx = np.arange(self.M)
        return self.first_column[(idx[:, None] - idx[None, :]) % self.M]


def _strang_column(t: np.ndarray) -> np.ndarray:
    M = len(t)
    j = np.arange(M)
    col = np.where(j <= M // 2, t[np.minimum(j, M - 1)], t[(M - j) % M])
    if M % 2 == 0:
        col[M // 2] = 0.0
    return col


def _kernel_column(t: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """``col[j] = b_j t_j + b_{M-j} t_{M-j}`` with ``t_M`` read as 0."""
    M = len(t)
    j = np.arange(M)
    tt = np.append(t, 0.0)
    bb = np.append(weights, weights[0])
    col = bb[j] * tt[j] + bb[M - j] * tt[M - j]
    col[0] = t[0]
    return col


def _superoptimal_spectrum(T: ToeplitzOperator, chan_spectrum: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Eigenvalues ``||T f_k||^2 / lambda_k(c(T))`` of the superoptimal circulant.

    ``f_k`` are the unit Fourier vectors; the diagonal of ``F* T^2 F`` equals
    ``||T f_k||^2``, evaluated in batches of Toeplitz products.
    """
    M = T.M
    j = np.arange(M)
    out = np.empty(M)
    for start in range(0, M, chunk):
        k = np.arange(start, min(start + chunk, M))
        F = np.exp(2j * np.pi * np.outer(k, j) / M) / math.sqrt(M)
        out[k] = np.sum(np.abs(T.matvec(F)) ** 2, axis=-1)
    return out / chan_spectrum.real


def circulant_approx(T: ToeplitzOperator, scheme="strang") -> CirculantOperator:
    """Circulant approximation of a symmetric Toeplitz matrix.

    With ``t_j`` the diagonals of ``T``:

    * ``strang``: copy the central band, ``t_j`` for ``j < M/2``, mirrored;
      the wrap entry ``j = M/2`` is zero for even ``M``.
    * ``tchan``: ``((M - j) t_j + j t_{M-j}) / M``, the Frobenius-optimal circulant.
    * ``rchan``: ``t_j + t_{M-j}``.
    * ``modified_dirichlet``: Strang but with ``t_{M/2}`` kept at the wrap entry.
    * ``von_hann`` / ``hamming``: kernel weights ``b_j = (1 + cos(pi j/M))/2`` and
      ``0.54 + 0.46 cos(pi j/M)``, combined as ``b_j t_j + b_{M-j} t_{M-j}``.
    * ``superoptimal``: minimizer of ``||I - C^{-1} T||_F``.
    """
    scheme = CirculantScheme.parse(scheme)
    t = np.asarray(T.first_column)
    M = len(t)
    if M < 2:
        raise ValueError("circulant approximation needs M >= 2")
    j = np.arange(M)
    if scheme is CirculantScheme.STRANG:
        col = _strang_column(t)
    elif scheme is CirculantScheme.MODIFIED_DIRICHLET:
        col = _strang_column(t)
        if M % 2 == 0:
            col[M // 2] = t[M // 2]
    elif scheme is CirculantScheme.TCHAN:
        col = _kernel_column(t, (M - j) / M)
    elif scheme is CirculantScheme.RCHAN:
        col = _kernel_column(t, np.ones(M))
    elif scheme is CirculantScheme.VON_HANN:
        col = _kernel_column(t, (1.0 + np.cos(np.pi * j / M)) / 2.0)
    elif scheme is CirculantScheme.HAMMING:
        col = _kernel_column(t, 0.54 + 0.46 * np.cos(np.pi * j / M))
    else:
        chan = circulant_approx(T, CirculantScheme.TCHAN)
        lam = _superoptimal_spectrum(T, chan.spectrum)
        col = _real_part(ifft(lam.astype(complex)), scale=np.max(np.abs(lam)) / M)
        return CirculantOperator(col, scheme, lam.astype(complex))
    return CirculantOperator(col, scheme)


def circulant_solve(C: CirculantOperator, shift: float, x: np.ndarray) -> np.ndarray:
    """Solve ``(shift I + C) y = x`` by diagonalization.

    :raises SingularityError: if some ``|shift + lambda_k|`` is below
        ``1e-14 * max|lambda|``.
    """
    x = np.asarray(x)
    shifted = shift + C.spectrum
    scale = max(np.max(np.abs(C.spectrum), initial=0.0), abs(shift), np.finfo(float).tiny)
    if np.min(np.abs(shifted)) < 1e-14 * scale:
        raise SingularityError("shifted circulant spectrum has a numerically zero entry")
    y = ifft(fft(x) / shifted)
    return y if np.iscomplexobj(x) else _real_part(y)


# ---------------------------------------------------------------------------
# Real block form


@dataclass(frozen=True, eq=False)
class BlockSystem:
    """Real block operator ``R = [T - D, -I; I, T - D]`` with right-hand side.

    The unknown is ordered ``(z; y)`` where the complex solution is
    ``y + i z``; the right-hand side of ``A x = p + i q`` is ``(-q; -p)``.
    """

    T: ToeplitzOperator
    d: np.ndarray
    rhs: np.ndarray | None = None

    def __post_init__(self):
        d = np.array(self.d, dtype=float).reshape(-1)
        if len(d) != self.T.M:
            raise ValueError(f"diagonal has length {len(d)}, expected {self.T.M}")
        d.setflags(write=False)
        object.__setattr__(self, "d", d)
        if self.rhs is not None:
            rhs = np.array(self.rhs, dtype=float)
            if rhs.shape != (2 * self.T.M,):
                raise ValueError(f"rhs must have length {2 * self.T.M}")
            rhs.setflags(write=False)
            object.__setattr__(self, "rhs", rhs)

    @property
    def M(self) -> int:
        return self.T.M

    @property
    def shape(self) -> tuple[int, int]:
        return (2 * self.M, 2 * self.M)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return block_matvec(self, x)

    __matmul__ = matvec

    def to_dense(self) -> np.ndarray:
        M = self.M
        K = self.T.to_dense() - np.diag(self.d)
        eye = np.eye(M)
        return np.block([[K, -eye], [eye, K]])

    def complex_dense(self) -> np.ndarray:
        """Dense ``A = iI + D - T`` of the originating complex system."""
        return 1j * np.eye(self.M) + np.diag(self.d) - self.T.to_dense()


def block_matvec(sys: BlockSystem, x: np.ndarray) -> np.ndarray:
    """``R x`` for ``x = (z; y)``: returns ``((T-D)z - y; z + (T-D)y)``."""
    x = np.asarray(x, dtype=float)
    M = sys.M
    if x.shape != (2 * M,):
        raise ValueError(f"expected a vector of length {2 * M}, got shape {x.shape}")
    zy = x.reshape(2, M)
    K = sys.T.matvec(zy) - sys.d * zy
    return np.concatenate([K[0] - zy[1], zy[0] + K[1]])


def complex_to_block(d: np.ndarray, T: ToeplitzOperator, b: np.ndarray) -> BlockSystem:
    """Real block form of ``(iI + D - T) x = b`` with ``D = diag(d)``."""
    b = np.asarray(b, dtype=complex)
    if b.shape != (T.M,):
        raise ValueError(f"rhs must have length {T.M}, got shape {b.shape}")
    return BlockSystem(T, d, np.concatenate([-b.imag, -b.real]))


def block_to_complex(x: np.ndarray) -> np.ndarray:
    """Map ``(z; y)`` back to ``y + i z``."""
    x = np.asarray(x)
    if x.ndim != 1 or len(x) % 2:
        raise ValueError("block vector must be 1-D with even length")
    M = len(x) // 2
    return x[M:] + 1j * x[:M]
