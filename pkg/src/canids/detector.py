"""LSTM attack detector with a scikit-learn estimator surface.

``LstmDetector`` consumes normalized windows of shape (n, T, d) and binary
labels (0 normal, 1 attack). ``fit`` trains with seeded per-epoch shuffling
and records a per-epoch history; ``partial_fit`` runs one pass over the given
samples in the given order with persistent optimizer state, which is what the
adversarial retraining loop builds on.
"""

from __future__ import annotations

import struct

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .lstm import GATE_ORDER, LstmParams, backward, bce_loss_batch, forward, init_params
from .optim import make_optimizer
from .validation import check_labels, check_windows

CHECKPOINT_MAGIC = b"CANIDSNN"
CHECKPOINT_VERSION = 1
_PREDICT_CHUNK = 256


class LstmDetector(BaseEstimator, ClassifierMixin):
    """Single LSTM layer plus a one-unit sigmoid head, trained on BCE.

    Predicts Attack when the probability is at or above ``threshold``.
    """

    def __init__(
        self,
        hidden_dim=128,
        epochs=50,
        batch_size=32,
        optimizer="adam",
        learning_rate=None,
        threshold=0.5,
        init_seed=0,
        shuffle_seed=0,
    ):
        self.hidden_dim = hidden_dim
        self.epochs = epochs
        self.batch_size = batch_size
        self.optimizer = optimizer
        self.learning_rate = learning_rate
        self.threshold = threshold
        self.init_seed = init_seed
        self.shuffle_seed = shuffle_seed

    # -- estimator surface ------------------------------------------------

    def fit(self, X, y, validation_data=None):
        """Train from a fresh initialization for ``epochs`` passes.

        ``validation_data`` is an optional (X_val, y_val) pair monitored once
        per epoch into ``history_``.
        """
        X = check_windows(X)
        y = check_labels(y, X.shape[0])
        self._init_state(X.shape[1], X.shape[2])
        self.history_ = {"train_loss": [], "train_acc": [], "val_loss": [], "val_acc": []}
        rng = np.random.default_rng(self.shuffle_seed)
        for _ in range(self.epochs):
            order = rng.permutation(X.shape[0])
            loss, acc = self._run_epoch(X[order], y[order])
            self.history_["train_loss"].append(loss)
            self.history_["train_acc"].append(acc)
            if validation_data is not None:
                val_loss, val_acc = self.evaluate(*validation_data)
            else:
                val_loss, val_acc = float("nan"), float("nan")
            self.history_["val_loss"].append(val_loss)
            self.history_["val_acc"].append(val_acc)
        return self

    def partial_fit(self, X, y):
        """One training pass over the samples, in the order given.

        Initializes parameters and optimizer on first use; afterwards the
        optimizer state persists across calls.
        """
        X = check_windows(X)
        y = check_labels(y, X.shape[0])
        if not self._is_fitted():
            self._init_state(X.shape[1], X.shape[2])
        self._run_epoch(X, y)
        return self

    def predict_proba(self, X) -> np.ndarray:
        p = self._probs(X)
        return np.column_stack([1.0 - p, p])

    def predict(self, X) -> np.ndarray:
        return (self._probs(X) >= self.threshold).astype(np.int64)

    def evaluate(self, X, y) -> tuple[float, float]:
        """(mean BCE loss, accuracy) without touching parameters."""
        X = check_windows(X, seq_len=self.seq_len_, n_signals=self.n_features_in_)
        y = check_labels(y, X.shape[0])
        p = self._probs(X)
        loss = float(bce_loss_batch(p, y).mean())
        acc = float(((p >= self.threshold).astype(np.int64) == y).mean())
        return loss, acc

    # -- internals ---------------------------------------------------------

    def _init_state(self, seq_len: int, input_dim: int) -> None:
        self.params_ = init_params(input_dim, self.hidden_dim, self.init_seed)
        self.optimizer_ = make_optimizer(self.optimizer, self.learning_rate)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = input_dim
        self.seq_len_ = seq_len

    def _is_fitted(self) -> bool:
        return hasattr(self, "params_")

    def _check_fitted(self) -> None:
        if not self._is_fitted():
            raise NotFittedError("LstmDetector is not fitted yet")

    def _run_epoch(self, X, y) -> tuple[float, float]:
        n = X.shape[0]
        loss_sum = 0.0
        correct = 0
        for lo in range(0, n, self.batch_size):
            xb = X[lo : lo + self.batch_size]
            yb = y[lo : lo + self.batch_size]
            probs, cache = forward(self.params_, xb)
            loss_sum += float(bce_loss_batch(probs, yb).sum())
            correct += int(((probs >= self.threshold).astype(np.int64) == yb).sum())
            grads, _ = backward(self.params_, cache, xb, yb)
            inv = 1.0 / xb.shape[0]
            grads = {k: g * inv for k, g in grads.items()}  # mean-loss gradient
            self.optimizer_.step(self.params_.arrays(), grads)
        return loss_sum / n, correct / n

    def _probs(self, X) -> np.ndarray:
        self._check_fitted()
        X = check_windows(X, seq_len=self.seq_len_, n_signals=self.n_features_in_)
        out = np.empty(X.shape[0])
        for lo in range(0, X.shape[0], _PREDICT_CHUNK):
            probs, _ = forward(self.params_, X[lo : lo + _PREDICT_CHUNK], return_cache=False)
            out[lo : lo + _PREDICT_CHUNK] = probs
        return out

    # -- checkpoints --------------------------------------------------------

    def save_checkpoint(self, path) -> None:
        """Binary checkpoint: fixed header then float64-LE parameter blocks."""
        self._check_fitted()
        p = self.params_
        with open(path, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(struct.pack("<IIII", CHECKPOINT_VERSION, p.input_dim, p.hidden_dim, self.seq_len_))
            fh.write(GATE_ORDER.encode("ascii"))
            for arr in p.arrays().values():
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())

    @classmethod
    def load_checkpoint(cls, path, **kwargs) -> "LstmDetector":
        with open(path, "rb") as fh:
            if fh.read(8) != CHECKPOINT_MAGIC:
                raise ValueError(f"{path}: not a detector checkpoint")
            version, input_dim, hidden_dim, seq_len = struct.unpack("<IIII", fh.read(16))
            if version != CHECKPOINT_VERSION:
                raise ValueError(f"{path}: unsupported checkpoint version {version}")
            gate_order = fh.read(4).decode("ascii")
            if gate_order != GATE_ORDER:
                raise ValueError(f"{path}: unknown gate order {gate_order!r}")
            det = cls(hidden_dim=hidden_dim, **kwargs)
            shapes = {
                "W": (4, hidden_dim, input_dim),
                "U": (4, hidden_dim, hidden_dim),
                "b": (4, hidden_dim),
                "w_out": (hidden_dim,),
                "b_out": (1,),
            }
            arrays = {}
            for name, shape in shapes.items():
                count = int(np.prod(shape))
                arrays[name] = np.frombuffer(fh.read(count * 8), dtype="<f8").reshape(shape).copy()
        det.params_ = LstmParams(**arrays)
        det.optimizer_ = make_optimizer(det.optimizer, det.learning_rate)
        det.classes_ = np.array([0, 1])
        det.n_features_in_ = input_dim
        det.seq_len_ = seq_len
        return det
