"""Command-line pipeline: decode, gen, train, attack, defend, eval.

Every command takes ``--config PATH`` (JSON, merged over defaults) and
``--seed N`` (rebases every seed in the config). Outputs land in ``--out``
together with a manifest recording the exact config that produced them.
Exit codes: 0 success, 1 usage/config error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, dbc as dbc_mod, traffic as traffic_mod
from .attacks import best_sweep_config, epsilon_sweep, perturb_batch
from .config import ConfigError, attack_config_from_dict, default_dbc_text, load_config, write_manifest
from .defense import RetrainConfig, adversarial_retrain, evaluate_robustness
from .detector import LstmDetector
from .fdia import FdiaConfig, craft_attack_dataset
from .metrics import (
    compute_metrics,
    emit_curves,
    macro_metrics,
    optimizer_comparison,
    write_comparison_csv,
    write_retrain_history_csv,
    write_sweep_csv,
)
from .preprocessing import RangeNormalizer

SPLIT_FILES = {"train": "windows_train.bin", "val": "windows_val.bin", "test": "windows_test.bin"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _load_catalog(cfg):
    if cfg.get("dbc"):
        text = Path(cfg["dbc"]).read_text()
    else:
        text = default_dbc_text()
    return dbc_mod.parse_dbc(text)


def _require_file(path, what) -> Path:
    p = Path(path)
    if not p.exists():
        raise ConfigError([f"{what} not found: {p}"])
    return p


def _load_split(data_dir, name):
    return traffic_mod.load_windows(_require_file(Path(data_dir) / SPLIT_FILES[name], f"{name} split"))


def _normalized_arrays(ds):
    norm = RangeNormalizer(ds.mins, ds.maxs)
    X, y = ds.to_arrays()
    return norm.transform(X), y, norm


def _detector_from_config(cfg) -> LstmDetector:
    m = cfg["model"]
    return LstmDetector(
        hidden_dim=m["hidden_dim"],
        epochs=m["epochs"],
        batch_size=m["batch_size"],
        optimizer=m["optimizer"],
        learning_rate=m["learning_rate"],
        threshold=m["threshold"],
        init_seed=m["init_seed"],
        shuffle_seed=m["shuffle_seed"],
    )


def _load_detector(path, cfg) -> LstmDetector:
    p = _require_file(path, "model checkpoint")
    m = cfg["model"]
    return LstmDetector.load_checkpoint(
        p,
        epochs=m["epochs"],
        batch_size=m["batch_size"],
        optimizer=m["optimizer"],
        learning_rate=m["learning_rate"],
        threshold=m["threshold"],
        init_seed=m["init_seed"],
        shuffle_seed=m["shuffle_seed"],
    )


def cmd_decode(args) -> int:
    dbc_path = _require_file(args.dbc, "DBC file")
    trace_path = _require_file(args.trace, "trace file")
    catalog = dbc_mod.parse_dbc(dbc_path.read_text())
    frames = dbc_mod.read_raw_trace(trace_path)
    rows, skipped = dbc_mod.decode_frames(frames, catalog)
    traffic_mod.write_decoded_csv(args.out, rows)
    if not frames:
        print("warning: trace is empty, wrote header-only output", file=sys.stderr)
    if skipped:
        print(f"skipped {skipped} frames with unknown CAN ids", file=sys.stderr)
    if catalog.skipped_lines:
        print(f"skipped {catalog.skipped_lines} unsupported DBC lines", file=sys.stderr)
    print(f"decoded {len(rows)} signal samples from {len(frames)} frames -> {args.out}")
    return 0


def _build_dataset(cfg, catalog, stride_s, decoded_csv=None):
    t = cfg["traffic"]
    if decoded_csv is not None:
        series = traffic_mod.ingest_decoded_csv(_require_file(decoded_csv, "decoded log"), catalog)
    else:
        series = traffic_mod.generate_trace(catalog, t["duration_s"], t["seed"], rate_hz=t["rate_hz"])
    grid = traffic_mod.resample_series(series, t["rate_hz"])
    windows = traffic_mod.build_windows(grid, cfg["windows"]["window_s"], stride_s)
    f = cfg["fdia"]
    fdia_cfg = FdiaConfig(
        attack_span_s=f["attack_span_s"],
        target_signals=tuple(f["target_signals"]) if f.get("target_signals") else None,
        rng_seed=f["seed"],
        fraction_attacked=f["fraction_attacked"],
    )
    rng = np.random.default_rng(f["seed"])
    labeled = craft_attack_dataset(windows, catalog, fdia_cfg, rng)
    split = traffic_mod.split_dataset(labeled, cfg["split"]["seed"])
    mins, maxs = catalog.ranges()
    return split, catalog.signal_names, np.asarray(mins), np.asarray(maxs)


def cmd_gen(args) -> int:
    cfg = load_config(args.config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    catalog = _load_catalog(cfg)
    stride = args.stride if args.stride is not None else cfg["windows"]["stride_s"]
    cfg["windows"]["stride_s"] = stride
    split, names, mins, maxs = _build_dataset(cfg, catalog, stride, decoded_csv=args.from_decoded)
    for name, windows in (("train", split.train), ("val", split.validation), ("test", split.test)):
        ds = traffic_mod.WindowDataset(names, mins, maxs, windows)
        traffic_mod.save_windows(out / SPLIT_FILES[name], ds)
    write_manifest(out, "gen", cfg, list(SPLIT_FILES.values()))
    print(
        f"dataset: {len(split.train)} train / {len(split.validation)} val / "
        f"{len(split.test)} test windows -> {out}"
    )
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train_ds = _load_split(args.data, "train")
    val_ds = _load_split(args.data, "val")
    X_train, y_train, _ = _normalized_arrays(train_ds)
    X_val, y_val, _ = _normalized_arrays(val_ds)
    detector = _detector_from_config(cfg)
    detector.fit(X_train, y_train, validation_data=(X_val, y_val))
    detector.save_checkpoint(out / "model.ckpt")
    if detector.history_["train_loss"]:
        emit_curves(detector.history_, out / "history.csv")
        outputs = ["model.ckpt", "history.csv"]
    else:
        outputs = ["model.ckpt"]
    write_manifest(out, "train", cfg, outputs)
    if detector.history_["val_acc"]:
        print(f"trained {cfg['model']['epochs']} epochs, final val acc {detector.history_['val_acc'][-1]:.4f}")
    else:
        print("trained 0 epochs (initialization only)")
    return 0


def cmd_attack(args) -> int:
    cfg = load_config(args.config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    test_ds = _load_split(args.data, "test")
    X_test, y_test, _ = _normalized_arrays(test_ds)
    detector = _load_detector(args.model, cfg)
    a = cfg["attack"]
    all_rows = []
    outputs = ["sweep.csv"]
    for kind in a["kinds"]:
        rows = epsilon_sweep(
            detector,
            X_test,
            y_test,
            kind,
            a["epsilons"],
            iterations=a["iterations"],
            alpha=a["alpha"],
            clamp_to_domain=a["clamp_to_domain"],
        )
        all_rows.extend(rows)
        best = best_sweep_config(rows, clamp_to_domain=a["clamp_to_domain"])
        adv = perturb_batch(detector, X_test, y_test, best)
        adv_windows = [
            traffic_mod.SampleWindow(adv[i], w.start_time, int(w.label), w.duration_s)
            for i, w in enumerate(test_ds.windows)
        ]
        # adversarial windows live in normalized space; ranges become [0, 1]
        adv_ds = traffic_mod.WindowDataset(
            test_ds.signal_names,
            np.zeros(len(test_ds.signal_names)),
            np.ones(len(test_ds.signal_names)),
            adv_windows,
        )
        adv_path = f"adv_test_{kind}.bin"
        traffic_mod.save_windows(out / adv_path, adv_ds)
        sidecar = {
            "kind": best.kind,
            "epsilon": best.epsilon,
            "alpha": best.step_size if best.kind == "bim" else best.epsilon,
            "iterations": best.iterations if best.kind == "bim" else 1,
            "clamp_to_domain": best.clamp_to_domain,
            "space": "normalized",
        }
        (out / f"{adv_path}.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
        outputs += [adv_path, f"{adv_path}.json"]
        peak = max(rows, key=lambda r: r["success_rate"])
        print(f"{kind}: best success rate {peak['success_rate']:.4f} at eps={peak['epsilon']:g}")
    write_sweep_csv(all_rows, out / "sweep.csv")
    write_manifest(out, "attack", cfg, outputs)
    return 0


def cmd_defend(args) -> int:
    cfg = load_config(args.config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train_ds = _load_split(args.data, "train")
    val_ds = _load_split(args.data, "val")
    X_train, y_train, _ = _normalized_arrays(train_ds)
    X_val, y_val, _ = _normalized_arrays(val_ds)
    detector = _load_detector(args.model, cfg)
    d = cfg["defense"]
    retrain_cfg = RetrainConfig(
        attack_cfgs=tuple(attack_config_from_dict(s) for s in d["attacks"]),
        batch_n=d["batch_n"],
        max_iterations=d["max_iterations"],
        stop_window=d["stop_window"],
        stop_threshold=d["stop_threshold"],
        seed=d["seed"],
    )
    detector, state = adversarial_retrain(detector, X_train, y_train, X_val, y_val, retrain_cfg)
    detector.save_checkpoint(out / "robust.ckpt")
    (out / "robust.ckpt.json").write_text(
        json.dumps({"retrain": d, "iterations_run": state.iteration}, indent=2, sort_keys=True) + "\n"
    )
    write_retrain_history_csv(state.history, out / "retrain_history.csv")
    write_manifest(out, "defend", cfg, ["robust.ckpt", "robust.ckpt.json", "retrain_history.csv"])
    last = state.history[-1]
    print(
        f"retrained {state.iteration} iterations; val clean acc {last['val_clean_acc']:.4f}, "
        f"val adv acc {last['val_adv_acc']:.4f}"
    )
    return 0


def cmd_eval(args) -> int:
    cfg = load_config(args.config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    test_ds = _load_split(args.data, "test")
    X_test, y_test, _ = _normalized_arrays(test_ds)
    detector = _load_detector(args.model, cfg)
    report = compute_metrics(detector, X_test, y_test)
    macro_p, macro_r, macro_f = macro_metrics(report.tp, report.fp, report.tn, report.fn)
    with open(out / "metrics.csv", "w", newline="") as fh:
        fh.write("accuracy,recall,precision,f1,tp,fp,tn,fn,recall_macro,precision_macro,f1_macro\n")
        fh.write(
            f"{report.accuracy!r},{report.recall!r},{report.precision!r},{report.f1!r},"
            f"{report.tp},{report.fp},{report.tn},{report.fn},"
            f"{macro_r!r},{macro_p!r},{macro_f!r}\n"
        )
    outputs = ["metrics.csv"]
    attack_cfgs = [attack_config_from_dict(s) for s in cfg["defense"]["attacks"]]
    if attack_cfgs:
        robustness = evaluate_robustness(detector, X_test, y_test, attack_cfgs)
        with open(out / "robustness.csv", "w", newline="") as fh:
            fh.write("kind,epsilon,alpha,iterations,clean_accuracy,adversarial_accuracy\n")
            for acfg, (clean_acc, adv_acc) in robustness.items():
                fh.write(
                    f"{acfg.kind},{acfg.epsilon!r},{acfg.step_size!r},{acfg.iterations},"
                    f"{clean_acc!r},{adv_acc!r}\n"
                )
        outputs.append("robustness.csv")
    if args.compare_optimizers:
        train_ds = _load_split(args.data, "train")
        val_ds = _load_split(args.data, "val")
        X_train, y_train, _ = _normalized_arrays(train_ds)
        X_val, y_val, _ = _normalized_arrays(val_ds)
        rows = optimizer_comparison(
            _detector_from_config(cfg),
            X_train,
            y_train,
            X_val,
            y_val,
            X_test,
            y_test,
            ["rmsprop", "adam", "adagrad", "sgd"],
        )
        write_comparison_csv(rows, out / "optimizer_comparison.csv")
        outputs.append("optimizer_comparison.csv")
    write_manifest(out, "eval", cfg, outputs)
    print(f"test accuracy {report.accuracy:.4f} (precision {report.precision:.2f}, recall {report.recall:.2f})")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="canids", description=__doc__)
    parser.add_argument("--version", action="version", version=f"canids {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decode", help="decode a raw CAN trace CSV with a DBC file")
    p.add_argument("--dbc", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decode)

    for name, func, extra in (
        ("gen", cmd_gen, "generate the labeled window dataset"),
        ("train", cmd_train, "train the detector"),
        ("attack", cmd_attack, "sweep FGSM/BIM attacks against a checkpoint"),
        ("defend", cmd_defend, "adversarially retrain a checkpoint"),
        ("eval", cmd_eval, "evaluate a checkpoint"),
    ):
        p = sub.add_parser(name, help=extra)
        p.add_argument("--config", default=None, help="JSON config (merged over defaults)")
        p.add_argument("--seed", type=int, default=None, help="rebase all config seeds")
        p.add_argument("--out", required=True)
        if name == "gen":
            p.add_argument("--stride", type=float, default=None, help="window stride in seconds")
            p.add_argument("--from-decoded", default=None, help="build from a decoded CSV log")
        else:
            p.add_argument("--data", required=True, help="dataset directory from `gen`")
        if name in ("attack", "defend", "eval"):
            p.add_argument("--model", required=True, help="detector checkpoint")
        if name == "eval":
            p.add_argument("--compare-optimizers", action="store_true")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
