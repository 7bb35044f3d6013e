from __future__ import annotations

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from ..errors import DimensionError, SingularSystemError


def solve_least_squares(A, B, ridge: float = 0.0) -> np.ndarray:
    """Minimize ``||A X - B||^2 + ridge * ||X||^2`` over X.

    Normal equations are formed and Cholesky-factored in float64; the result
    is returned as float32. ``A`` is (m, d), ``B`` is (m, k) or (m,).
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    vector = B.ndim == 1
    if vector:
        B = B[:, None]
    if A.ndim != 2 or B.ndim != 2:
        raise DimensionError("A and B must be 2-D")
    if A.shape[0] != B.shape[0]:
        raise DimensionError(f"row mismatch: A has {A.shape[0]}, B has {B.shape[0]}")
    if A.shape[0] < 1:
        raise DimensionError("need at least one row")
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    gram = A.T @ A
    gram[np.diag_indices_from(gram)] += ridge
    try:
        factor = cho_factor(gram, lower=True, check_finite=True)
    except LinAlgError as exc:
        raise SingularSystemError(
            "normal equations are singular; pass a positive ridge"
        ) from exc
    # cho_factor accepts numerically singular matrices with tiny pivots
    pivots = np.abs(np.diag(factor[0]))
    if pivots.min() <= 1e-7 * pivots.max():
        raise SingularSystemError("normal equations are singular; pass a positive ridge")
    X = cho_solve(factor, A.T @ B)
    X = X.astype(np.float32)
    return X[:, 0] if vector else X
