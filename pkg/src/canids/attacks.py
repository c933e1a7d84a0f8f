"""White-box gradient-sign attacks on the detector's normalized input space.

FGSM takes one signed-gradient step of size epsilon. BIM iterates smaller
steps of size alpha, clipping each iterate into the epsilon-ball around the
original window; by default the gradient is recomputed at every iterate (a
``frozen_gradient`` switch reuses the gradient at the original input, which
collapses the iteration into one scaled FGSM step). Budgets are in
normalized units; see ``RangeNormalizer.epsilon_from_physical`` to convert
a physical-unit budget.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lstm import backward, forward
from .validation import check_labels, check_windows

_GRAD_CHUNK = 128


@dataclass(frozen=True)
class AttackConfig:
    kind: str  # "fgsm" | "bim"
    epsilon: float
    alpha: float | None = None  # BIM step size; defaults to epsilon/iterations
    iterations: int = 1
    clamp_to_domain: bool = True
    frozen_gradient: bool = False

    def __post_init__(self):
        if self.kind not in ("fgsm", "bim"):
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.kind == "bim":
            if self.iterations < 1:
                raise ValueError("BIM needs at least one iteration")
            if self.alpha is not None and self.alpha > self.epsilon:
                raise ValueError("BIM step size alpha must not exceed epsilon")

    @property
    def step_size(self) -> float:
        if self.kind == "fgsm":
            return self.epsilon
        return self.epsilon / self.iterations if self.alpha is None else self.alpha

    def label(self) -> str:
        if self.kind == "fgsm":
            return f"fgsm(eps={self.epsilon:g})"
        return f"bim(eps={self.epsilon:g},alpha={self.step_size:g},iters={self.iterations})"


@dataclass
class AttackOutcome:
    adversarial: np.ndarray
    original_prediction: int
    adversarial_prediction: int
    flipped: bool
    l_inf_distance: float
    l2_distance: float


def _input_grads(detector, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-sample gradient of the cross-entropy w.r.t. every input entry."""
    out = np.empty_like(X)
    for lo in range(0, X.shape[0], _GRAD_CHUNK):
        xb = X[lo : lo + _GRAD_CHUNK]
        probs, cache = forward(detector.params_, xb)
        _, gx = backward(detector.params_, cache, xb, y[lo : lo + _GRAD_CHUNK], need_param_grads=False)
        out[lo : lo + _GRAD_CHUNK] = gx
    return out


def perturb_batch(detector, X, y, cfg: AttackConfig, mask: np.ndarray | None = None) -> np.ndarray:
    """Adversarial copies of the windows, labels untouched.

    ``mask`` optionally restricts the perturbation to selected timesteps
    (shape (T,)) or entries (shape (T, d)).
    """
    detector._check_fitted()
    X = check_windows(X, seq_len=detector.seq_len_, n_signals=detector.n_features_in_)
    y = check_labels(y, X.shape[0])
    if mask is not None:
        mask = np.asarray(mask, dtype=np.float64)
        if mask.ndim == 1:
            mask = mask[:, None]
    iterations = 1 if cfg.kind == "fgsm" else cfg.iterations
    step = cfg.step_size
    frozen = _input_grads(detector, X, y) if cfg.frozen_gradient else None
    x_adv = X
    for _ in range(iterations):
        g = frozen if frozen is not None else _input_grads(detector, x_adv, y)
        delta = step * np.sign(g)
        if mask is not None:
            delta = delta * mask
        x_adv = x_adv + delta
        np.clip(x_adv, X - cfg.epsilon, X + cfg.epsilon, out=x_adv)
    if cfg.clamp_to_domain:
        np.clip(x_adv, 0.0, 1.0, out=x_adv)
    return x_adv


def _single_outcome(detector, X, y_label, cfg, mask) -> AttackOutcome:
    X = check_windows(X, seq_len=detector.seq_len_, n_signals=detector.n_features_in_)
    if X.shape[0] != 1:
        raise ValueError("expected a single window")
    y = np.array([int(y_label)])
    adv = perturb_batch(detector, X, y, cfg, mask=mask)
    orig_pred = int(detector.predict(X)[0])
    adv_pred = int(detector.predict(adv)[0])
    diff = adv[0] - X[0]
    return AttackOutcome(
        adversarial=adv[0],
        original_prediction=orig_pred,
        adversarial_prediction=adv_pred,
        flipped=adv_pred != orig_pred,
        l_inf_distance=float(np.abs(diff).max()),
        l2_distance=float(np.sqrt((diff * diff).sum())),
    )


def fgsm(detector, X, y_label: int, cfg: AttackConfig, mask=None) -> AttackOutcome:
    """One signed-gradient step of size epsilon on a single window."""
    if cfg.kind != "fgsm":
        raise ValueError("config kind must be 'fgsm'")
    return _single_outcome(detector, X, y_label, cfg, mask)


def bim(detector, X, y_label: int, cfg: AttackConfig, mask=None) -> AttackOutcome:
    """Iterated signed-gradient steps, clipped to the epsilon-ball."""
    if cfg.kind != "bim":
        raise ValueError("config kind must be 'bim'")
    return _single_outcome(detector, X, y_label, cfg, mask)


def perturbed_predictions(detector, X, y, cfg: AttackConfig) -> np.ndarray:
    """Predictions on the adversarially perturbed copy of every window."""
    return detector.predict(perturb_batch(detector, X, y, cfg))


def attack_success_rate(detector, X, y, cfg: AttackConfig) -> tuple[float, float]:
    """(success_rate, post_attack_accuracy) over a test set, untargeted.

    Every window is perturbed; accuracy counts windows still classified as
    their true label, and the success rate is defined as its complement.
    """
    X = check_windows(X)
    y = check_labels(y, X.shape[0])
    if X.shape[0] == 0:
        raise ValueError("empty test set")
    post_acc = float((perturbed_predictions(detector, X, y, cfg) == y).mean())
    return 1.0 - post_acc, post_acc


def epsilon_sweep(
    detector,
    X,
    y,
    kind: str,
    eps_list,
    iterations: int = 5,
    alpha: float | None = None,
    clamp_to_domain: bool = True,
) -> list[dict]:
    """Success rate per epsilon, ascending. Rows are CSV-ready dicts."""
    eps_list = list(eps_list)
    if not eps_list:
        raise ValueError("eps_list is empty")
    if any(b <= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly ascending")
    X = check_windows(X)
    y = check_labels(y, X.shape[0])
    rows = []
    for eps in eps_list:
        cfg = _sweep_config(kind, eps, iterations, alpha, clamp_to_domain)
        preds = perturbed_predictions(detector, X, y, cfg)
        post_acc = float((preds == y).mean())
        normal, attacked = y == 0, y == 1
        rows.append(
            {
                "kind": kind,
                "epsilon": eps,
                "alpha": cfg.step_size if kind == "bim" else eps,
                "iterations": cfg.iterations if kind == "bim" else 1,
                "success_rate": 1.0 - post_acc,
                "post_attack_accuracy": post_acc,
                # per-class views: how each true class survives the attack
                "accuracy_normal": float((preds[normal] == 0).mean()) if normal.any() else 1.0,
                "accuracy_attack": float((preds[attacked] == 1).mean()) if attacked.any() else 1.0,
            }
        )
    return rows


def _sweep_config(kind, eps, iterations, alpha, clamp_to_domain) -> AttackConfig:
    if kind == "fgsm":
        return AttackConfig("fgsm", eps, clamp_to_domain=clamp_to_domain)
    return AttackConfig("bim", eps, alpha=alpha, iterations=iterations, clamp_to_domain=clamp_to_domain)


def best_sweep_config(rows: list[dict], clamp_to_domain: bool = True) -> AttackConfig:
    """Config of the highest-success row (first wins on ties)."""
    best = max(rows, key=lambda r: r["success_rate"])
    if best["kind"] == "fgsm":
        return AttackConfig("fgsm", best["epsilon"], clamp_to_domain=clamp_to_domain)
    return AttackConfig(
        "bim",
        best["epsilon"],
        alpha=best["alpha"],
        iterations=best["iterations"],
        clamp_to_domain=clamp_to_domain,
    )
