"""Dense linear-algebra kernels shared by the low-rank solvers.

Thin wrappers over LAPACK (Householder QR, divide-and-conquer SVD) that fix
sign conventions so that factorizations are reproducible run to run.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

__all__ = ["SvdResult", "qr_factor", "svd", "truncation_rank", "tail_norms"]


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``M = left @ diag(singular_values) @ right.T``."""

    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.singular_values) @ self.right.T


def _as_matrix(M, name="M") -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {M.shape}")
    return M


def qr_factor(M):
    """Reduced QR factorization with a nonnegative diagonal in ``R``.

    Householder based, so ``Q`` keeps orthonormal columns even when ``M`` is
    rank deficient (zero columns produce zero rows in ``R``).

    Parameters
    ----------
    M : (m, n) array_like
        Input with ``m >= n``.

    Returns
    -------
    Q : (m, n) ndarray
    R : (n, n) ndarray
    """
    M = _as_matrix(M)
    m, n = M.shape
    if m < n:
        raise ValueError(f"qr_factor needs rows >= cols, got {m}x{n}")
    Q, R = np.linalg.qr(M, mode="reduced")
    signs = np.where(np.diag(R) < 0.0, -1.0, 1.0)
    return Q * signs, R * signs[:, None]


def svd(M) -> SvdResult:
    """Thin SVD with descending singular values.

    Each left singular vector is flipped so that its largest-magnitude entry
    is positive (the matching right vector is flipped with it).
    """
    M = _as_matrix(M)
    if M.size == 0:
        raise ValueError("svd of an empty matrix")
    try:
        U, s, Vt = sla.svd(M, full_matrices=False, lapack_driver="gesdd",
                           check_finite=False)
    except np.linalg.LinAlgError:
        U, s, Vt = sla.svd(M, full_matrices=False, lapack_driver="gesvd",
                           check_finite=False)
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return SvdResult(U * signs, s, Vt.T * signs)


def tail_norms(singular_values) -> np.ndarray:
    """``t[k] = sqrt(sum_{j >= k} s_j**2)`` for ``k = 0..n`` (``t[n] = 0``)."""
    s = np.asarray(singular_values, dtype=float)
    sq = np.concatenate([np.cumsum((s * s)[::-1])[::-1], [0.0]])
    return np.sqrt(sq)


def truncation_rank(singular_values, tol: float, floor: int = 0) -> int:
    """Smallest rank ``r >= floor`` whose discarded tail has norm ``<= tol``.

    Raises
    ------
    ValueError
        If the singular values are not sorted descending, ``tol < 0`` or
        ``floor`` exceeds the number of values.
    """
    s = np.asarray(singular_values, dtype=float)
    if s.ndim != 1:
        raise ValueError("singular values must be a vector")
    if np.any(np.diff(s) > 0.0):
        raise ValueError("singular values must be sorted in descending order")
    if not tol >= 0:
        raise ValueError(f"tolerance must be nonnegative, got {tol}")
    n = s.size
    if not 0 <= floor <= n:
        raise ValueError(f"floor {floor} outside [0, {n}]")
    tails = tail_norms(s)
    ok = np.nonzero(tails[floor:] <= tol)[0]
    return int(floor + ok[0]) if ok.size else n
