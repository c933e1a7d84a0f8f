"""Min-max scaling of physical signal windows into the detector's [0, 1] space."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .validation import check_ranges, check_windows


class RangeNormalizer(BaseEstimator, TransformerMixin):
    """Scale each signal column by its catalog physical range.

    Stateless: the ranges come from the DBC catalog (or the dataset file
    header), not from data, so ``fit`` is a no-op and two runs over
    different traffic normalize identically. Constant-range signals map
    to 0.
    """

    def __init__(self, mins=None, maxs=None):
        self.mins = mins
        self.maxs = maxs

    @classmethod
    def from_catalog(cls, catalog) -> "RangeNormalizer":
        mins, maxs = catalog.ranges()
        return cls(np.asarray(mins), np.asarray(maxs))

    def _spans(self) -> tuple[np.ndarray, np.ndarray]:
        mins, maxs = check_ranges(self.mins, self.maxs)
        spans = maxs - mins
        spans[spans == 0.0] = 1.0
        return mins, spans

    def fit(self, X=None, y=None):
        self._spans()
        return self

    def transform(self, X) -> np.ndarray:
        mins, spans = self._spans()
        X = check_windows(X, n_signals=len(mins))
        return (X - mins) / spans

    def inverse_transform(self, X) -> np.ndarray:
        mins, spans = self._spans()
        X = check_windows(X, n_signals=len(mins))
        return X * spans + mins

    def epsilon_from_physical(self, eps_phys, signal_index: int | None = None):
        """Convert a physical-unit perturbation budget to normalized units.

        With ``signal_index`` given, returns the scalar budget for that
        signal; otherwise the per-signal vector for a shared physical budget.
        """
        _, spans = self._spans()
        if signal_index is not None:
            return float(eps_phys) / float(spans[signal_index])
        return np.asarray(eps_phys, dtype=np.float64) / spans
