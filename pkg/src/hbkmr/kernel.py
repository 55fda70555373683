"""Gaussian kernel and Cholesky factorization of the marginal covariance.

The exposure-response surface h gets a Gaussian-process prior whose Gram
matrix uses a per-coordinate weighted squared-distance kernel. Integrating h
out of the model leaves the marginal covariance ``tau * K + diag(s)``, and
every likelihood evaluation reduces to one Cholesky factorization of it; the
:class:`CovFactor` wrapper carries that factor plus the derived quantities
(log determinant, triangular solves) the rest of the package needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.linalg.lapack import dpotrf

__all__ = [
    "FactorizationError",
    "kernel_entry",
    "kernel_matrix",
    "squared_distance_tensor",
    "KernelMatrix",
    "CovFactor",
    "factor_cov",
]


class FactorizationError(RuntimeError):
    """Raised when the marginal covariance cannot be Cholesky-factorized."""


def kernel_entry(za: np.ndarray, zb: np.ndarray, r: np.ndarray) -> float:
    """Kernel value ``exp(-sum_m r_m (za_m - zb_m)^2)`` for two exposure rows."""
    za = np.asarray(za, dtype=float).ravel()
    zb = np.asarray(zb, dtype=float).ravel()
    r = np.asarray(r, dtype=float).ravel()
    if not (za.shape == zb.shape == r.shape):
        raise ValueError("za, zb, and r must have matching lengths")
    if np.any(r < 0):
        raise ValueError("kernel weights r must be nonnegative")
    diff = za - zb
    return float(np.exp(-np.dot(r, diff * diff)))


def kernel_matrix(Za: np.ndarray, Zb: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Kernel cross-matrix between the rows of ``Za`` and ``Zb``.

    Returns the (n_a, n_b) matrix with entries
    ``exp(-sum_m r_m (Za[i, m] - Zb[j, m])^2)``. With ``Za is Zb`` the result
    is symmetric with an exact unit diagonal.
    """
    Za = np.atleast_2d(np.asarray(Za, dtype=float))
    Zb = np.atleast_2d(np.asarray(Zb, dtype=float))
    r = np.asarray(r, dtype=float).ravel()
    if Za.shape[1] != Zb.shape[1] or Za.shape[1] != r.shape[0]:
        raise ValueError(
            f"column mismatch: Za has {Za.shape[1]}, Zb has {Zb.shape[1]}, r has {r.shape[0]}"
        )
    if np.any(r < 0):
        raise ValueError("kernel weights r must be nonnegative")
    # Weighted squared distance via the expanded square; symmetrize the
    # within-set case so round-off cannot break exchangeability.
    Sa = Za * np.sqrt(r)
    Sb = Zb * np.sqrt(r)
    aa = np.einsum("ij,ij->i", Sa, Sa)
    bb = np.einsum("ij,ij->i", Sb, Sb)
    d2 = aa[:, None] + bb[None, :] - 2.0 * (Sa @ Sb.T)
    np.maximum(d2, 0.0, out=d2)
    K = np.exp(-d2)
    if Za is Zb or (Za.shape == Zb.shape and np.array_equal(Za, Zb)):
        K = 0.5 * (K + K.T)
        np.fill_diagonal(K, 1.0)
    return K


def squared_distance_tensor(Z: np.ndarray) -> np.ndarray:
    """Per-coordinate squared-distance stack ``D[m, i, j] = (Z[i,m]-Z[j,m])^2``.

    The kernel Gram matrix is ``exp(-sum_m r_m D[m])``; caching D lets a
    sampler update the Gram matrix after a single-coordinate change in r with
    one multiply-add instead of a full rebuild.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    diff = Z.T[:, :, None] - Z.T[:, None, :]
    return diff * diff


@dataclass
class KernelMatrix:
    """Gram matrix of the exposures under weights ``r``, with its inputs."""

    K: np.ndarray
    r: np.ndarray

    @classmethod
    def from_exposures(cls, Z: np.ndarray, r: np.ndarray) -> "KernelMatrix":
        return cls(K=kernel_matrix(Z, Z, r), r=np.asarray(r, dtype=float).ravel())

    def __post_init__(self) -> None:
        self.K = np.asarray(self.K, dtype=float)
        self.r = np.asarray(self.r, dtype=float).ravel()
        if self.K.ndim != 2 or self.K.shape[0] != self.K.shape[1]:
            raise ValueError("K must be square")


@dataclass
class CovFactor:
    """Lower Cholesky factor of ``tau * K + diag(s)`` plus derived pieces.

    Attributes
    ----------
    L : ndarray, shape (N, N)
        Lower-triangular factor with ``L @ L.T`` equal to the covariance.
    log_det : float
        Log determinant of the covariance.
    jitter : float
        Diagonal jitter that had to be added (0.0 in the usual case).
    """

    L: np.ndarray
    log_det: float
    jitter: float = 0.0

    @property
    def n(self) -> int:
        return self.L.shape[0]

    def solve_lower(self, b: np.ndarray) -> np.ndarray:
        """Solve ``L a = b``."""
        return solve_triangular(self.L, b, lower=True, check_finite=False)

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve ``(L L') a = b``, i.e. apply the covariance inverse."""
        half = solve_triangular(self.L, b, lower=True, check_finite=False)
        return solve_triangular(self.L.T, half, lower=False, check_finite=False)

    def quad_form(self, b: np.ndarray) -> float:
        """Quadratic form ``b' (L L')^{-1} b``."""
        half = self.solve_lower(b)
        return float(half @ half)


def factor_cov(
    K: KernelMatrix | np.ndarray, tau: float, s_diag: np.ndarray
) -> CovFactor:
    """Cholesky-factorize the marginal covariance ``tau * K + diag(s_diag)``.

    On a not-positive-definite failure, retries once with diagonal jitter
    ``1e-10 * trace / N`` and raises :class:`FactorizationError` if that also
    fails.
    """
    Kmat = K.K if isinstance(K, KernelMatrix) else np.asarray(K, dtype=float)
    s_diag = np.asarray(s_diag, dtype=float).ravel()
    n = Kmat.shape[0]
    if s_diag.shape[0] != n:
        raise ValueError("s_diag length does not match K")
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    V = tau * Kmat
    V.flat[:: n + 1] += s_diag
    trace = float(np.trace(V))

    jitter = 0.0
    L, info = dpotrf(V, lower=1, clean=1, overwrite_a=0)
    if info != 0:
        jitter = 1e-10 * trace / n
        V.flat[:: n + 1] += jitter
        L, info = dpotrf(V, lower=1, clean=1, overwrite_a=0)
        if info != 0:
            raise FactorizationError(
                f"covariance not positive definite (dpotrf info={info}, "
                f"tau={tau:.3g}, jitter={jitter:.3g})"
            )
    log_det = 2.0 * float(np.log(np.diag(L)).sum())
    return CovFactor(L=L, log_det=log_det, jitter=jitter)
