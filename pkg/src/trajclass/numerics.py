"""Shared dense linear-algebra kernels.

Everything operates on float64 numpy arrays and is pure: no caching, no
mutation of inputs, safe to call from any number of threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "SvdConvergenceError",
    "SvdFactors",
    "as_matrix",
    "svd",
    "numerical_rank",
    "expm",
    "principal_angle_cosines",
    "vec",
    "unvec",
]

_EPS = float(np.finfo(float).eps)


class SvdConvergenceError(RuntimeError):
    """The SVD iteration hit its cap without converging."""


@dataclass(frozen=True)
class SvdFactors:
    """Reduced SVD ``M = U @ diag(S) @ V.T`` with ``S`` nonincreasing.

    ``U`` and ``V`` have orthonormal columns; ``V`` holds the right singular
    vectors as columns (it is not pre-transposed).
    """

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Coerce input to a finite float64 2-D array (scalars become 1x1)."""
    out = np.atleast_2d(np.asarray(M, dtype=float))
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={out.ndim}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite entries")
    return out


def svd(M) -> SvdFactors:
    """Reduced (economy) singular value decomposition.

    Returns ``min(rows, cols)`` singular values sorted nonincreasing.  A
    failed LAPACK iteration raises :class:`SvdConvergenceError` rather than
    returning silently wrong factors.  The bidiagonalization driver is used
    in preference to divide-and-conquer: robustness matters more than speed
    at the small dense sizes handled here.
    """
    A = as_matrix(M)
    try:
        U, S, Vh = scipy.linalg.svd(A, full_matrices=False, lapack_driver="gesvd")
    except scipy.linalg.LinAlgError as exc:
        raise SvdConvergenceError(
            f"SVD failed to converge on a {A.shape[0]}x{A.shape[1]} matrix"
        ) from exc
    return SvdFactors(U=U, S=S, V=Vh.T)


def numerical_rank(M, rel_tol: float | None = None) -> int:
    """Count singular values above ``rel_tol * max(S)``.

    The default tolerance is ``max(rows, cols) * machine_epsilon``, the
    standard conservative choice for deciding rank from floating-point data.
    """
    A = as_matrix(M)
    if rel_tol is None:
        rel_tol = max(A.shape) * _EPS
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    S = svd(A).S
    smax = float(S[0]) if S.size else 0.0
    if smax == 0.0:
        return 0
    return int(np.count_nonzero(S > rel_tol * smax))


def expm(M) -> np.ndarray:
    """Matrix exponential via scaling-and-squaring with Pade approximants."""
    A = as_matrix(M)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"expm needs a square matrix, got shape {A.shape}")
    return scipy.linalg.expm(A)


def principal_angle_cosines(U1, U2) -> np.ndarray:
    """Cosines of the principal angles between two column spaces.

    Both inputs must already have orthonormal columns (orthonormalize with
    ``svd(...).U`` first).  The cosines are the singular values of
    ``U1.T @ U2``, clamped into [0, 1] so downstream arcsine/arccosine never
    sees a rounding artifact.  Sorted nonincreasing: the first entry is the
    cosine of the smallest principal angle.
    """
    A = as_matrix(U1, "U1")
    B = as_matrix(U2, "U2")
    if A.shape[0] != B.shape[0]:
        raise ValueError(f"row counts differ: {A.shape[0]} vs {B.shape[0]}")
    return np.clip(svd(A.T @ B).S, 0.0, 1.0)


def vec(M) -> np.ndarray:
    """Column-stacking vectorization, the fixed convention package-wide.

    With this convention ``vec(Q) @ np.kron(Y, Y) == Y @ Q @ Y``.
    """
    return as_matrix(M).reshape(-1, order="F")


def unvec(w, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vec`."""
    out = np.asarray(w, dtype=float).ravel()
    if out.size != rows * cols:
        raise ValueError(f"cannot reshape length {out.size} into {rows}x{cols}")
    return out.reshape((rows, cols), order="F")
