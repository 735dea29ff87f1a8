"""Input validation helpers shared by the estimators."""

import numpy as np

PRIOR_ATOL = 1e-9


def check_prior(prior, n_attributes=None, name="prior"):
    """Validate an attribute prior and return it as a float array.

    Parameters
    ----------
    prior : array-like of shape (n_attributes,)
        Probability of each attribute class in one domain.
    n_attributes : int, optional
        Expected length.
    name : str
        Used in error messages.

    Returns
    -------
    prior : ndarray of shape (n_attributes,)
    """
    p = np.asarray(prior, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D vector, got shape {p.shape}")
    if n_attributes is not None and p.size != n_attributes:
        raise ValueError(f"{name} has length {p.size}, expected {n_attributes}")
    if not np.all(np.isfinite(p)):
        raise ValueError(f"{name} contains non-finite entries")
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError(f"{name} entries must lie in [0, 1]")
    if abs(p.sum() - 1.0) > PRIOR_ATOL:
        raise ValueError(f"{name} must sum to 1 (sum={p.sum()!r})")
    return p


def check_weights(weights, n_samples=None):
    """Validate a per-sample weight vector (finite, nonnegative)."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1:
        raise ValueError(f"weights must be 1-D, got shape {w.shape}")
    if n_samples is not None and w.size != n_samples:
        raise ValueError(f"weights have length {w.size}, expected {n_samples}")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights contain non-finite entries")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    return w


def check_features(X, n_features=None, name="X"):
    """Return ``X`` as a finite 2-D float array."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1) if n_features is None or X.size == n_features else X.reshape(-1, 1)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {X.shape}")
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"{name} has {X.shape[1]} features, expected {n_features}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite values")
    return X


def check_labels(labels, n_classes, name="labels"):
    """Return integer labels after checking they index ``range(n_classes)``."""
    a = np.asarray(labels)
    if a.ndim != 1:
        raise ValueError(f"{name} must be 1-D")
    if a.size and not np.issubdtype(a.dtype, np.integer):
        if not np.all(np.equal(np.mod(a, 1), 0)):
            raise ValueError(f"{name} must be integers")
    a = a.astype(np.int64)
    if a.size and (a.min() < 0 or a.max() >= n_classes):
        raise ValueError(f"{name} must lie in [0, {n_classes - 1}]")
    return a
