"""Input validation helpers shared by the estimator-facing modules."""

from __future__ import annotations

import numpy as np


def check_windows(X, *, seq_len: int | None = None, n_signals: int | None = None) -> np.ndarray:
    """Validate a batch of windows as a finite float64 array of shape (n, T, d).

    A single (T, d) window is promoted to a batch of one.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[None, :, :]
    if X.ndim != 3:
        raise ValueError(f"expected windows of shape (n, T, d), got {X.shape}")
    if not np.isfinite(X).all():
        raise ValueError("windows contain non-finite values")
    if seq_len is not None and X.shape[1] != seq_len:
        raise ValueError(f"expected sequence length {seq_len}, got {X.shape[1]}")
    if n_signals is not None and X.shape[2] != n_signals:
        raise ValueError(f"expected {n_signals} signals, got {X.shape[2]}")
    return X


def check_labels(y, n_samples: int) -> np.ndarray:
    """Validate binary labels (0 = normal, 1 = attack) against a batch size."""
    y = np.asarray(y)
    if y.shape != (n_samples,):
        raise ValueError(f"expected {n_samples} labels, got shape {y.shape}")
    y = y.astype(np.int64)
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    return y


def check_ranges(mins, maxs) -> tuple[np.ndarray, np.ndarray]:
    """Validate per-signal physical ranges (aligned min/max arrays)."""
    mins = np.asarray(mins, dtype=np.float64)
    maxs = np.asarray(maxs, dtype=np.float64)
    if mins.shape != maxs.shape or mins.ndim != 1:
        raise ValueError("mins and maxs must be 1-d arrays of equal length")
    if (mins > maxs).any():
        raise ValueError("min_phys greater than max_phys for some signal")
    return mins, maxs
