"""Input checks shared by estimators, attacks and loaders."""

import numpy as np


class NotFittedError(ValueError, AttributeError):
    pass


def check_images(X, name: str = "X", box=(0.0, 1.0)) -> np.ndarray:
    """Float64 copy of ``X`` with at least 2 dims, all finite and inside ``box``."""
    X = np.array(X, dtype=np.float64)
    if X.ndim < 2:
        raise ValueError(f"{name} must have a leading batch axis, got shape {X.shape}")
    if X.shape[0] == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains NaN or Inf")
    if box is not None:
        lo, hi = box
        if X.min() < lo - 1e-12 or X.max() > hi + 1e-12:
            raise ValueError(f"{name} values must lie in [{lo}, {hi}], got [{X.min()}, {X.max()}]")
    return X


def check_labels(y, n_samples: int | None = None, n_classes: int | None = None, name: str = "y") -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {y.shape}")
    if y.size and not np.all(np.equal(np.mod(y, 1), 0)):
        raise ValueError(f"{name} must hold integer class indices")
    y = y.astype(np.int64)
    if n_samples is not None and y.shape[0] != n_samples:
        raise ValueError(f"{name} has {y.shape[0]} entries, expected {n_samples}")
    if n_classes is not None and y.size and (y.min() < 0 or y.max() >= n_classes):
        raise ValueError(f"{name} outside class range [0, {n_classes})")
    return y


def check_positive(value, name: str, allow_zero: bool = False):
    if value is None or not np.isfinite(value) or value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ValueError(f"{name} must be {bound}, got {value}")
    return value


def check_is_fitted(estimator, attribute: str):
    if getattr(estimator, attribute, None) is None:
        raise NotFittedError(
            f"This {type(estimator).__name__} instance is not fitted yet. Call 'fit' first."
        )
