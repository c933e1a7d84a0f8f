"""Session-scoped fixtures for the full-scale acceptance pipeline.

The heavy artifacts (synthetic dataset, trained detector, attack sweeps,
retrained detector) are built once and shared by every test that needs
them; everything is seeded so assertions are reproducible bit for bit.
"""

import numpy as np
import pytest

from canids.attacks import best_sweep_config, epsilon_sweep
from canids.config import DEFAULT_CONFIG, default_dbc_text
from canids.dbc import parse_dbc
from canids.defense import RetrainConfig, adversarial_retrain
from canids.detector import LstmDetector
from canids.fdia import FdiaConfig, craft_attack_dataset
from canids.preprocessing import RangeNormalizer
from canids.traffic import (
    build_windows,
    generate_trace,
    resample_series,
    split_dataset,
    windows_to_arrays,
)


@pytest.fixture(scope="session")
def catalog():
    return parse_dbc(default_dbc_text())


@pytest.fixture(scope="session")
def dataset(catalog):
    """The full-scale synthetic FDIA dataset: 1894 windows, T=100, d=20."""
    t = DEFAULT_CONFIG["traffic"]
    series = generate_trace(catalog, t["duration_s"], t["seed"], rate_hz=t["rate_hz"])
    grid = resample_series(series, t["rate_hz"])
    windows = build_windows(grid, 10.0, 1.0)
    f = DEFAULT_CONFIG["fdia"]
    cfg = FdiaConfig(
        rng_seed=f["seed"],
        fraction_attacked=f["fraction_attacked"],
        target_signals=tuple(f["target_signals"]) if f.get("target_signals") else None,
    )
    labeled = craft_attack_dataset(windows, catalog, cfg, np.random.default_rng(f["seed"]))
    split = split_dataset(labeled, DEFAULT_CONFIG["split"]["seed"])
    norm = RangeNormalizer.from_catalog(catalog)
    out = {}
    for name, part in (("train", split.train), ("val", split.validation), ("test", split.test)):
        X, y = windows_to_arrays(part)
        out[name] = (norm.transform(X), y)
    out["windows"] = labeled
    out["normalizer"] = norm
    return out


@pytest.fixture(scope="session")
def trained_detector(dataset):
    """Adam, 50 epochs, batch 32: the reference detector (criterion 3)."""
    m = DEFAULT_CONFIG["model"]
    det = LstmDetector(
        hidden_dim=m["hidden_dim"],
        epochs=m["epochs"],
        batch_size=m["batch_size"],
        optimizer="adam",
        init_seed=m["init_seed"],
        shuffle_seed=m["shuffle_seed"],
    )
    det.fit(*dataset["train"], validation_data=dataset["val"])
    return det


@pytest.fixture(scope="session")
def sweeps(dataset, trained_detector):
    """Epsilon sweeps of both attacks against the trained detector."""
    X_test, y_test = dataset["test"]
    eps = DEFAULT_CONFIG["attack"]["epsilons"]
    iters = DEFAULT_CONFIG["attack"]["iterations"]
    return {
        "fgsm": epsilon_sweep(trained_detector, X_test, y_test, "fgsm", eps),
        "bim": epsilon_sweep(trained_detector, X_test, y_test, "bim", eps, iterations=iters),
    }


@pytest.fixture(scope="session")
def best_attacks(sweeps):
    return {kind: best_sweep_config(rows) for kind, rows in sweeps.items()}


@pytest.fixture(scope="session")
def retrained(dataset, trained_detector, best_attacks):
    """Adversarially retrained detector against both attacks at best eps."""
    import copy

    d = DEFAULT_CONFIG["defense"]
    cfg = RetrainConfig(
        attack_cfgs=(best_attacks["fgsm"], best_attacks["bim"]),
        batch_n=d["batch_n"],
        max_iterations=d["max_iterations"],
        stop_window=d["stop_window"],
        stop_threshold=d["stop_threshold"],
        seed=d["seed"],
    )
    # retrain a fresh copy so the shared trained detector stays untouched
    det = copy.deepcopy(trained_detector)
    robust, state = adversarial_retrain(det, *dataset["train"], *dataset["val"], cfg)
    return robust, state, cfg
