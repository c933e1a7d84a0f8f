"""False-data injection: overwrite a short span of a window with bounded noise.

The injected value for signal i is ``X + delta`` with
``delta ~ U(min_i - X, max_i - X)``, i.e. uniform over the signal's valid
physical range, so injected traffic never leaves the range a plausibility
check would accept. Signals with a zero floor reduce to
``delta ~ U(-X, max - X)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .traffic import Label, SampleWindow


class LabelContractError(ValueError):
    """Window is already labeled Attack."""


@dataclass(frozen=True)
class FdiaConfig:
    attack_span_s: float = 1.0
    target_signals: tuple[str, ...] | None = None  # None = every signal
    rng_seed: int = 0
    fraction_attacked: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.attack_span_s <= 10.0:
            raise ValueError(f"attack_span_s must be in (0, 10], got {self.attack_span_s}")
        if not 0.0 < self.fraction_attacked <= 1.0:
            raise ValueError(f"fraction_attacked must be in (0, 1], got {self.fraction_attacked}")


def _target_columns(signal_names: list[str], cfg: FdiaConfig) -> np.ndarray:
    if cfg.target_signals is None:
        return np.arange(len(signal_names))
    index = {name: j for j, name in enumerate(signal_names)}
    missing = [n for n in cfg.target_signals if n not in index]
    if missing:
        raise ValueError(f"target signals not in catalog: {missing}")
    return np.array([index[n] for n in cfg.target_signals])


def inject_fdia(
    window: SampleWindow,
    catalog,
    cfg: FdiaConfig,
    rng: np.random.Generator,
) -> SampleWindow:
    """Return an Attack-labeled copy with one contiguous span overwritten.

    ``catalog`` is anything exposing ``signal_names`` and ``range_of(name)``
    (a parsed DBC catalog or a dataset's own range table). The span start is
    uniform over offsets that keep the span inside the window; deltas are
    redrawn per timestep and signal.
    """
    if window.label == Label.ATTACK:
        raise LabelContractError("window is already labeled Attack")
    names = list(catalog.signal_names)
    cols = _target_columns(names, cfg)
    T = window.X.shape[0]
    span_pts = max(1, int(round(cfg.attack_span_s / window.duration_s * T)))
    if span_pts > T:
        raise ValueError(f"attack span {cfg.attack_span_s}s exceeds the window")
    start = int(rng.integers(0, T - span_pts + 1))
    X = window.X.copy()
    mins = np.array([catalog.range_of(names[j])[0] for j in cols])
    maxs = np.array([catalog.range_of(names[j])[1] for j in cols])
    block = X[start : start + span_pts, cols]
    delta = rng.uniform(mins - block, maxs - block)
    X[start : start + span_pts, cols] = block + delta
    return SampleWindow(X, window.start_time, Label.ATTACK, window.duration_s)


def craft_attack_dataset(
    samples: list[SampleWindow],
    catalog,
    cfg: FdiaConfig,
    rng: np.random.Generator,
) -> list[SampleWindow]:
    """Inject FDIA into a random fraction of the windows (rounded to nearest).

    Untouched windows pass through unchanged; attacked ones are fresh copies.
    Deterministic for a given generator state.
    """
    for w in samples:
        if w.label != Label.NORMAL:
            raise LabelContractError("craft_attack_dataset expects all-Normal input")
    n_attack = int(round(cfg.fraction_attacked * len(samples)))
    chosen = set(rng.choice(len(samples), size=n_attack, replace=False).tolist())
    out = []
    for i, w in enumerate(samples):
        out.append(inject_fdia(w, catalog, cfg, rng) if i in chosen else w)
    return out
