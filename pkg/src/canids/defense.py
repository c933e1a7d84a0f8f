"""Iterative adversarial retraining against gradient-sign attacks.

Each iteration samples N clean training windows, crafts N adversarial
examples from them against the current model (labels preserved), appends
those to a grow-only repository, resamples N from the repository, and runs
one training pass over the combined 2N batch. Stops when the adversarial
validation accuracy has held at the stop threshold for a run of consecutive
iterations, or at the iteration cap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attacks import AttackConfig, perturb_batch
from .validation import check_labels, check_windows


@dataclass(frozen=True)
class RetrainConfig:
    attack_cfgs: tuple[AttackConfig, ...]
    batch_n: int = 200
    max_iterations: int = 100
    stop_window: int = 5
    stop_threshold: float = 0.99
    seed: int = 0

    def __post_init__(self):
        if not self.attack_cfgs:
            raise ValueError("at least one attack config is required")
        if self.batch_n < 1 or self.max_iterations < 1:
            raise ValueError("batch_n and max_iterations must be positive")
        if not 0.0 < self.stop_threshold <= 1.0:
            raise ValueError("stop_threshold must be in (0, 1]")


@dataclass
class RetrainState:
    repo_X: list[np.ndarray] = field(default_factory=list)  # one (N, T, d) block per iteration
    repo_y: list[np.ndarray] = field(default_factory=list)
    iteration: int = 0
    history: list[dict] = field(default_factory=list)

    @property
    def repo_size(self) -> int:
        return sum(block.shape[0] for block in self.repo_X)

    def repo_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.concatenate(self.repo_X), np.concatenate(self.repo_y)


def adversarial_retrain(detector, X_train, y_train, X_val, y_val, cfg: RetrainConfig):
    """Harden a fitted detector in place; returns (detector, RetrainState).

    With several attack configs the iterations rotate through them
    round-robin. The optimizer state persists across iterations.
    """
    detector._check_fitted()
    X_train = check_windows(X_train)
    y_train = check_labels(y_train, X_train.shape[0])
    rng = np.random.default_rng(cfg.seed)
    state = RetrainState()
    n = cfg.batch_n
    streak = 0
    for i in range(1, cfg.max_iterations + 1):
        attack = cfg.attack_cfgs[(i - 1) % len(cfg.attack_cfgs)]
        idx = rng.choice(X_train.shape[0], size=n, replace=False)
        clean_X, clean_y = X_train[idx], y_train[idx]
        adv_X = perturb_batch(detector, clean_X, clean_y, attack)
        state.repo_X.append(adv_X)
        state.repo_y.append(clean_y.copy())
        repo_X, repo_y = state.repo_arrays()
        pick = rng.choice(repo_X.shape[0], size=n, replace=False)
        batch_X = np.concatenate([clean_X, repo_X[pick]])
        batch_y = np.concatenate([clean_y, repo_y[pick]])
        order = rng.permutation(2 * n)
        detector.partial_fit(batch_X[order], batch_y[order])
        _, train_acc = detector.evaluate(batch_X, batch_y)
        _, val_clean_acc = detector.evaluate(X_val, y_val)
        val_adv = perturb_batch(detector, X_val, y_val, attack)
        _, val_adv_acc = detector.evaluate(val_adv, y_val)
        state.iteration = i
        state.history.append(
            {
                "iteration": i,
                "train_acc": train_acc,
                "val_clean_acc": val_clean_acc,
                "val_adv_acc": val_adv_acc,
                "attack_kind": attack.kind,
                "n_clean": int(clean_X.shape[0]),
                "n_adv": int(pick.shape[0]),
            }
        )
        streak = streak + 1 if val_adv_acc >= cfg.stop_threshold else 0
        if streak >= cfg.stop_window:
            break
    return detector, state


def evaluate_robustness(detector, X_test, y_test, attack_cfgs) -> dict[AttackConfig, tuple[float, float]]:
    """Clean and under-attack test accuracy per attack config.

    An empty config list yields a single entry keyed by ``None`` holding the
    clean accuracy twice.
    """
    X_test = check_windows(X_test)
    y_test = check_labels(y_test, X_test.shape[0])
    _, clean_acc = detector.evaluate(X_test, y_test)
    if not attack_cfgs:
        return {None: (clean_acc, clean_acc)}
    out: dict[AttackConfig, tuple[float, float]] = {}
    for cfg in attack_cfgs:
        adv = perturb_batch(detector, X_test, y_test, cfg)
        _, adv_acc = detector.evaluate(adv, y_test)
        out[cfg] = (clean_acc, adv_acc)
    return out
