"""Input validation helpers in the spirit of ``sklearn.utils.validation``."""
from __future__ import annotations

import numpy as np

from .exceptions import DegenerateInputError, DimensionError, ParameterError


def check_batch(x, n_features=None, name="x"):
    """Return ``x`` as a finite float64 array with a non-empty leading axis."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 2:
        raise DimensionError(f"{name} must be at least 2-D, got shape {x.shape}")
    if x.shape[0] == 0:
        raise DegenerateInputError(f"{name} has no samples")
    if n_features is not None and x.shape[1] != n_features:
        raise DimensionError(f"{name} has {x.shape[1]} features, expected {n_features}")
    if not np.all(np.isfinite(x)):
        raise ParameterError(f"{name} contains NaN or Inf")
    return x


def check_labels(y, n_classes, n_samples=None):
    y = np.asarray(y)
    if y.ndim != 1:
        raise DimensionError(f"labels must be 1-D, got shape {y.shape}")
    if n_samples is not None and y.shape[0] != n_samples:
        raise DimensionError(f"{y.shape[0]} labels for {n_samples} samples")
    if y.size and not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise ParameterError("labels must be integer class ids")
    y = y.astype(np.int64)
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise ParameterError(f"labels must lie in [0, {n_classes}), got range [{y.min()}, {y.max()}]")
    return y


def check_positive(value, name, integer=False):
    if integer and (isinstance(value, bool) or int(value) != value):
        raise ParameterError(f"{name} must be an integer, got {value!r}")
    if not value > 0:
        raise ParameterError(f"{name} must be positive, got {value!r}")
    return int(value) if integer else float(value)
