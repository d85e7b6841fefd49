"""Input checks shared by the estimator wrappers."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.utils.validation import check_array


def check_rates(lambdas: Sequence[float], name: str = "lambdas") -> np.ndarray:
    """Strictly descending, positive, finite eigenvalue magnitudes."""
    lam = check_array(np.atleast_1d(np.asarray(lambdas, dtype=float))[None, :], ensure_all_finite=True)[0]
    if np.any(lam <= 0):
        raise ValueError(f"{name} must be positive, got {lam.tolist()}")
    if np.any(np.diff(lam) >= 0):
        raise ValueError(f"{name} must be strictly descending, got {lam.tolist()}")
    return lam


def check_points(X, n_features: int, name: str = "X") -> np.ndarray:
    """2-D finite float array with exactly ``n_features`` columns."""
    X = check_array(X, dtype=float, ensure_all_finite=True)
    if X.shape[1] != n_features:
        raise ValueError(f"{name} has {X.shape[1]} columns, expected {n_features}")
    return X


def check_in_section(X, u: int, s: int) -> tuple[np.ndarray, np.ndarray]:
    """Split rows ``[x_1..x_u, y_1..y_s]`` and check ``0 < ||x|| < 1`` and ``||y|| = 1``."""
    X = check_points(X, u + s)
    x, y = X[:, :u], X[:, u:]
    ny = np.linalg.norm(y, axis=1)
    if np.any(np.abs(ny - 1.0) > 1e-12):
        raise ValueError("the y block of every row must have unit norm")
    return x, y
