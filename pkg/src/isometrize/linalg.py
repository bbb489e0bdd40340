"""Dense complex linear algebra primitives.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. The Hermitian
eigendecomposition is the single spectral kernel: square roots, inverse
square roots and PSD tests all go through :func:`herm_eigen`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFinite, NotHermitian, NotPSD, NotSquare, Singular

HERMITIAN_TOL = 1e-12
PSD_CLAMP_TOL = 1e-12
SINGULAR_TOL = 1e-14


def as_matrix(data, square=False) -> np.ndarray:
    """Coerce ``data`` to a finite 2-D complex array."""
    m = np.array(data, dtype=np.complex128)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2 or 0 in m.shape:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFinite("matrix has NaN or infinite entries")
    if square and m.shape[0] != m.shape[1]:
        raise NotSquare(f"matrix of shape {m.shape} is not square")
    return m


def _square(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotSquare(f"matrix of shape {m.shape} is not square")
    return m


def adjoint(m) -> np.ndarray:
    return np.conj(np.asarray(m, dtype=np.complex128)).T


def op_norm(m) -> float:
    """Largest singular value."""
    m = np.asarray(m, dtype=np.complex128)
    if not m.size or not np.any(m):
        return 0.0
    return float(np.linalg.norm(m, 2))


def op_norms(stack) -> np.ndarray:
    """Spectral norms of a stack of matrices, shape ``(k, n, n)``."""
    stack = np.asarray(stack)
    if stack.shape[0] == 0:
        return np.zeros(0)
    return np.linalg.svd(stack, compute_uv=False)[:, 0]


def hermitian_part(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.complex128)
    return 0.5 * (m + np.conj(m.swapaxes(-1, -2)))


def check_hermitian(m, tol=HERMITIAN_TOL) -> np.ndarray:
    m = _square(m)
    scale = op_norm(m)
    defect = op_norm(m - adjoint(m))
    if defect > tol * scale:
        raise NotHermitian(f"||M - M*|| = {defect:.3e} exceeds {tol:.1e} * ||M||")
    return m


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # unitary, columns

    def reconstruct(self, values=None) -> np.ndarray:
        """``V diag(f) V*`` with ``f`` defaulting to the eigenvalues."""
        v = self.eigenvectors
        f = self.eigenvalues if values is None else values
        return (v * f) @ adjoint(v)


def herm_eigen(m, tol=HERMITIAN_TOL) -> SpectralDecomposition:
    m = check_hermitian(m, tol)
    w, v = np.linalg.eigh(hermitian_part(m))
    return SpectralDecomposition(w, v)


def _clamped_spectrum(m, tol):
    dec = herm_eigen(m)
    scale = max(abs(dec.eigenvalues[0]), abs(dec.eigenvalues[-1]))
    if dec.eigenvalues[0] < -tol * scale:
        raise NotPSD(f"eigenvalue {dec.eigenvalues[0]:.3e} below -{tol:.0e} * ||M||")
    return dec, np.clip(dec.eigenvalues, 0.0, None)


def herm_sqrt(m, tol=PSD_CLAMP_TOL) -> np.ndarray:
    """Positive square root; eigenvalues within ``-tol*||M||`` of zero are clamped."""
    dec, w = _clamped_spectrum(m, tol)
    return hermitian_part(dec.reconstruct(np.sqrt(w)))


def herm_inv_sqrt(m, tol=PSD_CLAMP_TOL) -> np.ndarray:
    dec, w = _clamped_spectrum(m, tol)
    if w[0] <= SINGULAR_TOL * w[-1]:
        raise Singular("matrix is singular, no inverse square root")
    return hermitian_part(dec.reconstruct(1.0 / np.sqrt(w)))


def psd_bounds(m) -> tuple[float, float]:
    """``(lambda_min, lambda_max)`` of a Hermitian matrix."""
    w = herm_eigen(m).eigenvalues
    return float(w[0]), float(w[-1])


def isometry_residual(t) -> float:
    """``||T*T - I||``."""
    t = _square(t)
    return op_norm(adjoint(t) @ t - np.eye(t.shape[0]))


def unitary_residual(t) -> float:
    """``max(||T*T - I||, ||TT* - I||)``."""
    t = _square(t)
    eye = np.eye(t.shape[0])
    return max(op_norm(adjoint(t) @ t - eye), op_norm(t @ adjoint(t) - eye))


def singular_values(m) -> np.ndarray:
    return np.linalg.svd(np.asarray(m, dtype=np.complex128), compute_uv=False)


def condition_number(m, tol=SINGULAR_TOL) -> float:
    """``sigma_max / sigma_min``; raises :class:`Singular` below ``tol * sigma_max``."""
    s = singular_values(_square(m))
    if s[-1] <= tol * s[0] or s[0] == 0.0:
        raise Singular(f"smallest singular value {s[-1]:.3e} is numerically zero")
    return float(s[0] / s[-1])


def inverse(m) -> np.ndarray:
    m = _square(m)
    condition_number(m)
    return np.linalg.inv(m)
