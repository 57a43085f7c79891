from __future__ import annotations

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, lu_factor, lu_solve

from app.errors import SingularMatrixError

_PIVOT_RTOL = 64 * np.finfo(float).eps


def checked_lu(matrix: np.ndarray, *, label: str) -> tuple[np.ndarray, np.ndarray]:
    if not np.all(np.isfinite(matrix)):
        raise SingularMatrixError(label, reason="non-finite entries")
    lu, piv = lu_factor(matrix)
    pivots = np.abs(np.diag(lu))
    scale = pivots.max(initial=0.0)
    if scale == 0.0 or pivots.min() <= _PIVOT_RTOL * scale:
        raise SingularMatrixError(label, min_pivot=float(pivots.min(initial=0.0)), max_pivot=float(scale))
    return lu, piv


def lu_inverse(matrix: np.ndarray, *, label: str) -> np.ndarray:
    factors = checked_lu(matrix, label=label)
    return lu_solve(factors, np.eye(matrix.shape[0]))


def row_sum_norm(matrix: np.ndarray) -> np.ndarray:
    return np.abs(matrix).sum(axis=1)


def row_euclidean_norm(matrix: np.ndarray) -> np.ndarray:
    return np.linalg.norm(matrix, axis=1)


def is_positive_definite(matrix: np.ndarray) -> bool:
    if matrix.size == 0:
        return True
    symmetric = 0.5 * (matrix + matrix.T)
    try:
        cho_factor(symmetric)
    except LinAlgError:
        return False
    return True
