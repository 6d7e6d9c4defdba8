"""Symmetric-matrix helpers shared by every other module.

Covariance-like matrices are plain ``float64`` ndarrays. :func:`as_cov` is the
single entry point that turns user input into one: it symmetrizes as
``(M + M.T) / 2`` (exactly symmetric in IEEE arithmetic) or mirrors a single
triangle, and rejects non-finite values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack, solve_triangular

__all__ = [
    "NotPositiveDefinite",
    "EigenSummary",
    "as_cov",
    "sym_eigen_extremes",
    "spectral_norm",
    "matrix_one_norm",
    "cholesky",
    "solve_spd",
]


class NotPositiveDefinite(np.linalg.LinAlgError):
    """Raised when a Cholesky pivot is not strictly above the tolerance.

    ``pivot`` is the 0-based index of the first failing pivot.
    """

    def __init__(self, pivot: int, message: str | None = None):
        self.pivot = pivot
        super().__init__(message or f"matrix is not positive definite (pivot {pivot} failed)")


@dataclass(frozen=True)
class EigenSummary:
    min_eig: float
    max_eig: float


def as_cov(m, triangle: str | None = None) -> np.ndarray:
    """Return a finite, exactly symmetric float64 copy of ``m``.

    Parameters
    ----------
    m : array_like, shape (p, p)
    triangle : {None, "lower", "upper"}
        If given, only that triangle of ``m`` is read and mirrored. Otherwise
        the full matrix is symmetrized as ``(m + m.T) / 2``.
    """
    a = np.array(m, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if triangle is None:
        return (a + a.T) / 2
    if triangle == "lower":
        low = np.tril(a)
    elif triangle == "upper":
        low = np.triu(a).T
    else:
        raise ValueError(f"triangle must be 'lower' or 'upper', got {triangle!r}")
    return low + np.tril(low, -1).T


def _check_finite(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def sym_eigen_extremes(m) -> EigenSummary:
    # full symmetric decomposition; fine for p <= 500
    eig = np.linalg.eigvalsh(_check_finite(m))
    return EigenSummary(float(eig[0]), float(eig[-1]))


def min_eig(m) -> float:
    return sym_eigen_extremes(m).min_eig


def spectral_norm(m) -> float:
    """Largest absolute eigenvalue of a symmetric matrix (its operator 2-norm)."""
    ext = sym_eigen_extremes(m)
    return max(abs(ext.min_eig), abs(ext.max_eig))


def matrix_one_norm(m) -> float:
    """Maximum absolute column sum."""
    a = _check_finite(m)
    return float(np.abs(a).sum(axis=0).max())


def cholesky(m, tol: float = 0.0) -> np.ndarray:
    """Lower Cholesky factor ``L`` with ``L @ L.T == m``.

    Raises :class:`NotPositiveDefinite` with the failing pivot index when any
    pivot (``L[k, k] ** 2``) is ``<= tol``.
    """
    a = _check_finite(m)
    c, info = lapack.dpotrf(a, lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefinite(info - 1)
    if info < 0:
        raise ValueError(f"dpotrf: illegal argument {-info}")
    if tol > 0:
        bad = np.flatnonzero(np.diag(c) ** 2 <= tol)
        if bad.size:
            raise NotPositiveDefinite(int(bad[0]))
    return c


def solve_spd(m, rhs, tol: float = 0.0) -> np.ndarray:
    """Solve ``m @ x = rhs`` for symmetric positive definite ``m``."""
    b = np.asarray(rhs, dtype=float)
    if b.shape[0] != np.shape(m)[0]:
        raise ValueError(f"rhs has length {b.shape[0]}, matrix has dim {np.shape(m)[0]}")
    L = cholesky(m, tol=tol)
    y = solve_triangular(L, b, lower=True, check_finite=False)
    return solve_triangular(L.T, y, lower=False, check_finite=False)
