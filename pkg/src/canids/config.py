"""Declarative run configuration: one JSON document drives every command.

Validation collects every problem before raising, so a bad config reports
all of its issues at once. Every random choice in the pipeline flows from a
seed named here; ``--seed N`` on the command line rebases them all
deterministically.
"""

from __future__ import annotations

import copy
import hashlib
import json
from importlib import resources
from pathlib import Path

from .attacks import AttackConfig


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("invalid config:\n" + "\n".join(f"  - {p}" for p in problems))
        self.problems = problems


DEFAULT_CONFIG = {
    "dbc": None,  # null = bundled 20-signal catalog
    "traffic": {"duration_s": 1903.0, "rate_hz": 10.0, "seed": 7},
    "windows": {"window_s": 10.0, "stride_s": 1.0},
    "split": {"seed": 101},
    "fdia": {"attack_span_s": 1.0, "fraction_attacked": 0.5, "target_signals": None, "seed": 55},
    "model": {
        "hidden_dim": 128,
        "epochs": 50,
        "batch_size": 32,
        "optimizer": "adam",
        "learning_rate": None,
        "threshold": 0.5,
        "init_seed": 11,
        "shuffle_seed": 12,
    },
    "attack": {
        "kinds": ["fgsm", "bim"],
        "epsilons": [0.05, 0.1, 0.15, 0.2, 0.25, 0.3],
        "iterations": 5,
        "alpha": None,
        "clamp_to_domain": True,
    },
    "defense": {
        "attacks": [{"kind": "fgsm", "epsilon": 0.3}, {"kind": "bim", "epsilon": 0.3, "iterations": 5}],
        "batch_n": 200,
        "max_iterations": 100,
        "stop_window": 5,
        "stop_threshold": 0.99,
        "seed": 77,
    },
}

_SEED_FIELDS = [
    ("traffic", "seed"),
    ("split", "seed"),
    ("fdia", "seed"),
    ("model", "init_seed"),
    ("model", "shuffle_seed"),
    ("defense", "seed"),
]


def default_dbc_text() -> str:
    return resources.files("canids").joinpath("data/default_20.dbc").read_text()


def load_config(path=None, seed_override: int | None = None) -> dict:
    """Merge a JSON config over the defaults and validate it."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError([f"config file not found: {p}"])
        try:
            user = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError([f"config is not valid JSON: {exc}"]) from exc
        _merge(cfg, user)
    if seed_override is not None:
        for offset, (section, key) in enumerate(_SEED_FIELDS):
            cfg[section][key] = int(seed_override) + offset
    validate_config(cfg)
    return cfg


def _merge(base: dict, override: dict) -> None:
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value


def validate_config(cfg: dict) -> None:
    problems = []
    if cfg.get("dbc") is not None and not Path(cfg["dbc"]).exists():
        problems.append(f"dbc file not found: {cfg['dbc']}")
    traffic = cfg.get("traffic", {})
    if traffic.get("duration_s", 0) <= 10.0:
        problems.append("traffic.duration_s must exceed 10")
    if traffic.get("rate_hz", 0) <= 0:
        problems.append("traffic.rate_hz must be positive")
    windows = cfg.get("windows", {})
    if windows.get("window_s", 0) <= 0 or windows.get("stride_s", 0) <= 0:
        problems.append("windows.window_s and windows.stride_s must be positive")
    fdia = cfg.get("fdia", {})
    if not 0 < fdia.get("attack_span_s", 0) <= windows.get("window_s", 10.0):
        problems.append("fdia.attack_span_s must be in (0, window_s]")
    if not 0 < fdia.get("fraction_attacked", 0) <= 1:
        problems.append("fdia.fraction_attacked must be in (0, 1]")
    model = cfg.get("model", {})
    if model.get("hidden_dim", 0) < 1:
        problems.append("model.hidden_dim must be at least 1")
    if model.get("epochs", -1) < 0:
        problems.append("model.epochs must be nonnegative")
    if model.get("optimizer") not in ("adam", "rmsprop", "adagrad", "sgd"):
        problems.append("model.optimizer must be one of adam, rmsprop, adagrad, sgd")
    if not 0 < model.get("threshold", 0) < 1:
        problems.append("model.threshold must be in (0, 1)")
    attack = cfg.get("attack", {})
    eps = attack.get("epsilons", [])
    if not eps or any(b <= a for a, b in zip(eps, eps[1:])):
        problems.append("attack.epsilons must be non-empty and strictly ascending")
    for kind in attack.get("kinds", []):
        if kind not in ("fgsm", "bim"):
            problems.append(f"attack.kinds contains unknown kind {kind!r}")
    defense = cfg.get("defense", {})
    if defense.get("batch_n", 0) < 1 or defense.get("max_iterations", 0) < 1:
        problems.append("defense.batch_n and defense.max_iterations must be positive")
    if not 0 < defense.get("stop_threshold", 0) <= 1:
        problems.append("defense.stop_threshold must be in (0, 1]")
    for entry in defense.get("attacks", []):
        try:
            attack_config_from_dict(entry)
        except (ValueError, KeyError, TypeError) as exc:
            problems.append(f"defense.attacks entry {entry!r}: {exc}")
    for section, key in _SEED_FIELDS:
        value = cfg.get(section, {}).get(key)
        if not isinstance(value, int):
            problems.append(f"{section}.{key} must be an explicit integer seed")
    if problems:
        raise ConfigError(problems)


def attack_config_from_dict(entry: dict) -> AttackConfig:
    kind = entry["kind"]
    if kind == "fgsm":
        return AttackConfig("fgsm", float(entry["epsilon"]), clamp_to_domain=entry.get("clamp_to_domain", True))
    return AttackConfig(
        "bim",
        float(entry["epsilon"]),
        alpha=entry.get("alpha"),
        iterations=int(entry.get("iterations", 5)),
        clamp_to_domain=entry.get("clamp_to_domain", True),
    )


def config_sha256(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def write_manifest(out_dir: Path, command: str, cfg: dict, outputs: list[str]) -> None:
    from . import __version__

    manifest = {
        "command": command,
        "package_version": __version__,
        "config_sha256": config_sha256(cfg),
        "config": cfg,
        "outputs": sorted(outputs),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
