"""Symmetric positive-definite solves with a bounded jitter fallback."""
from __future__ import annotations

import numpy as np
from scipy import linalg


class NumericalError(ArithmeticError):
    """A numerical step failed (factorization, non-finite bound term, ...)."""


def spd_inverse(precision: np.ndarray, retries: int = 3):
    """Invert an SPD matrix through its Cholesky factor.

    Returns ``(covariance, cholesky_factor, logdet_covariance)``.  If the
    factorization fails, a diagonal jitter of 1e-10 * mean(diag) is added
    and escalated tenfold per retry.
    """
    n = precision.shape[0]
    jitter = 1e-10 * np.trace(precision) / n
    A = precision
    for attempt in range(retries + 1):
        try:
            L = linalg.cholesky(A, lower=True, check_finite=True)
            break
        except (linalg.LinAlgError, ValueError):
            if attempt == retries:
                raise NumericalError(
                    f"Cholesky factorization failed after {retries} jitter retries "
                    f"(size={n}, trace={np.trace(precision):.6g}, "
                    f"min diag={np.min(np.diag(precision)):.6g}, last jitter={jitter:.3g})"
                ) from None
            A = precision + jitter * np.eye(n)
            jitter *= 10.0
    L_inv = linalg.solve_triangular(L, np.eye(n), lower=True)
    cov = L_inv.T @ L_inv
    logdet_cov = -2.0 * np.sum(np.log(np.diag(L)))
    return cov, L, logdet_cov
