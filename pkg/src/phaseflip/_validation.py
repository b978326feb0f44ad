"""Input checks for the estimator API, built on scikit-learn's validators."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array, check_consistent_length


def as_column(X) -> np.ndarray:
    """Accept a 1-D sweep or a single-feature 2-D array; return the 1-D sweep."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    arr = check_array(arr, ensure_2d=True, dtype=float)
    if arr.shape[1] != 1:
        raise ValueError(f"curve fits take a single feature, got {arr.shape[1]}")
    return arr[:, 0]


def check_curve_arrays(X, y, sample_weight=None):
    x = as_column(X)
    y = check_array(np.asarray(y, dtype=float), ensure_2d=False, dtype=float)
    if y.ndim != 1:
        raise ValueError("y must be one-dimensional")
    check_consistent_length(x, y)
    if sample_weight is None:
        w = np.ones_like(y)
    else:
        w = check_array(np.asarray(sample_weight, dtype=float), ensure_2d=False, dtype=float)
        check_consistent_length(y, w)
        if np.any(w < 0):
            raise ValueError("sample weights must be non-negative")
    return x, y, w


def check_probability(value: float, name: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must be in [0, 1], got {value}")
    return value
