"""Input validation helpers shared by the estimator and IO layers."""

from __future__ import annotations

import numpy as np


def check_view_array(X) -> list[np.ndarray]:
    """Coerce X into a list of (T, D) float64 matrices with uniform shape.

    Accepts a 3D array (n, T, D) or a sequence of 2D matrices.
    """
    if isinstance(X, np.ndarray) and X.ndim == 3:
        views = [X[i] for i in range(X.shape[0])]
    else:
        views = list(X)
    if not views:
        raise ValueError("X is empty")
    out = []
    shape = None
    for i, v in enumerate(views):
        arr = np.asarray(v, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"sample {i} is not a (T, D) matrix: shape {arr.shape}")
        if arr.shape[0] < 2:
            raise ValueError(f"sample {i} has {arr.shape[0]} frames; need at least 2")
        if not np.isfinite(arr).all():
            raise ValueError(f"sample {i} contains non-finite values")
        if shape is None:
            shape = arr.shape
        elif arr.shape != shape:
            raise ValueError(
                f"sample {i} has shape {arr.shape}, expected {shape} like sample 0")
        out.append(arr)
    return out


def check_labels(y, n_samples: int) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1 or y.shape[0] != n_samples:
        raise ValueError(f"y must be 1-dimensional with {n_samples} entries, got shape {y.shape}")
    return y
