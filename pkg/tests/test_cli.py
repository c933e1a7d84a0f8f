import csv
import json
from pathlib import Path

import numpy as np
import pytest

from canids.cli import main
from canids.config import ConfigError, load_config, validate_config
from canids.dbc import parse_dbc, write_raw_trace
from canids.traffic import generate_trace, quantize_series, series_to_frames

TINY_DBC = """BO_ 256 M1: 8 E
 SG_ ALPHA : 0|8@1+ (0.5,0) [0|127.5] ""
 SG_ BETA : 8|8@1+ (0.25,-16) [-16|47.75] ""

BO_ 257 M2: 8 E
 SG_ GAMMA : 0|12@1+ (0.1,0) [0|409.5] ""
"""

TINY_CONFIG = {
    "traffic": {"duration_s": 40.0, "rate_hz": 2.0, "seed": 3},
    "windows": {"window_s": 10.0, "stride_s": 1.0},
    "split": {"seed": 4},
    "fdia": {"attack_span_s": 1.0, "fraction_attacked": 0.5, "target_signals": None, "seed": 5},
    "model": {
        "hidden_dim": 8,
        "epochs": 2,
        "batch_size": 8,
        "optimizer": "adam",
        "learning_rate": None,
        "threshold": 0.5,
        "init_seed": 6,
        "shuffle_seed": 7,
    },
    "attack": {
        "kinds": ["fgsm", "bim"],
        "epsilons": [0.1, 0.2],
        "iterations": 2,
        "alpha": None,
        "clamp_to_domain": True,
    },
    "defense": {
        "attacks": [{"kind": "fgsm", "epsilon": 0.2}],
        "batch_n": 4,
        "max_iterations": 2,
        "stop_window": 5,
        "stop_threshold": 1.0,
        "seed": 8,
    },
}


@pytest.fixture()
def tiny_dbc(tmp_path):
    path = tmp_path / "tiny.dbc"
    path.write_text(TINY_DBC)
    return path


@pytest.fixture()
def tiny_config(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(TINY_CONFIG))
    return path


def run(*argv):
    return main([str(a) for a in argv])


class TestDecode:
    def test_round_trip_against_generator_truth(self, tmp_path, tiny_dbc):
        catalog = parse_dbc(TINY_DBC)
        series = generate_trace(catalog, 11.0, seed=1, rate_hz=2.0)
        truth = quantize_series(series, catalog)
        trace_path = tmp_path / "trace.csv"
        write_raw_trace(trace_path, series_to_frames(series, catalog))
        out = tmp_path / "decoded.csv"
        assert run("decode", "--dbc", tiny_dbc, "--trace", trace_path, "--out", out) == 0
        got = {}
        with open(out, newline="") as fh:
            for row in csv.DictReader(fh):
                got.setdefault(row["signal_name"], []).append(float(row["value"]))
        for name in truth.names:
            assert np.array_equal(got[name], truth.signals[name][1])

    def test_missing_dbc_exits_nonzero(self, tmp_path, capsys):
        code = run("decode", "--dbc", tmp_path / "nope.dbc", "--trace", tmp_path / "t.csv",
                   "--out", tmp_path / "o.csv")
        assert code == 1
        assert "not found" in capsys.readouterr().err

    def test_empty_trace_warns_and_succeeds(self, tmp_path, tiny_dbc, capsys):
        trace = tmp_path / "empty.csv"
        trace.write_text("timestamp,can_id_hex,b0,b1,b2,b3,b4,b5,b6,b7\n")
        out = tmp_path / "decoded.csv"
        assert run("decode", "--dbc", tiny_dbc, "--trace", trace, "--out", out) == 0
        assert "empty" in capsys.readouterr().err
        assert out.read_text().strip() == "timestamp,signal_name,value"


class TestPipeline:
    def test_gen_train_attack_defend_eval(self, tmp_path, tiny_config):
        data = tmp_path / "data"
        assert run("gen", "--config", tiny_config, "--out", data) == 0
        for name in ("windows_train.bin", "windows_val.bin", "windows_test.bin", "manifest.json"):
            assert (data / name).exists()
        manifest = json.loads((data / "manifest.json").read_text())
        assert manifest["command"] == "gen"
        assert manifest["config"]["traffic"]["duration_s"] == 40.0

        run_dir = tmp_path / "run"
        assert run("train", "--config", tiny_config, "--data", data, "--out", run_dir) == 0
        assert (run_dir / "model.ckpt").exists()
        with open(run_dir / "history.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 1 + TINY_CONFIG["model"]["epochs"]

        atk = tmp_path / "atk"
        assert run("attack", "--config", tiny_config, "--data", data,
                   "--model", run_dir / "model.ckpt", "--out", atk) == 0
        assert (atk / "sweep.csv").exists()
        for kind in ("fgsm", "bim"):
            assert (atk / f"adv_test_{kind}.bin").exists()
            sidecar = json.loads((atk / f"adv_test_{kind}.bin.json").read_text())
            assert sidecar["kind"] == kind and "epsilon" in sidecar

        dfd = tmp_path / "dfd"
        assert run("defend", "--config", tiny_config, "--data", data,
                   "--model", run_dir / "model.ckpt", "--out", dfd) == 0
        assert (dfd / "robust.ckpt").exists()
        with open(dfd / "retrain_history.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["iteration", "train_acc", "val_clean_acc", "val_adv_acc", "attack_kind"]
        assert len(rows) == 1 + TINY_CONFIG["defense"]["max_iterations"]

        ev = tmp_path / "ev"
        assert run("eval", "--config", tiny_config, "--data", data,
                   "--model", dfd / "robust.ckpt", "--out", ev) == 0
        assert (ev / "metrics.csv").exists() and (ev / "robustness.csv").exists()

    def test_rerun_outputs_byte_identical(self, tmp_path, tiny_config):
        data1, data2 = tmp_path / "d1", tmp_path / "d2"
        assert run("gen", "--config", tiny_config, "--out", data1) == 0
        assert run("gen", "--config", tiny_config, "--out", data2) == 0
        for name in ("windows_train.bin", "windows_val.bin", "windows_test.bin"):
            assert (data1 / name).read_bytes() == (data2 / name).read_bytes()

        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        for out in (out1, out2):
            assert run("train", "--config", tiny_config, "--data", data1, "--out", out) == 0
        assert (out1 / "history.csv").read_bytes() == (out2 / "history.csv").read_bytes()
        assert (out1 / "model.ckpt").read_bytes() == (out2 / "model.ckpt").read_bytes()

    def test_gen_from_decoded_log(self, tmp_path, tiny_dbc, tiny_config):
        catalog = parse_dbc(TINY_DBC)
        series = generate_trace(catalog, 40.0, seed=1, rate_hz=2.0)
        trace_path = tmp_path / "trace.csv"
        write_raw_trace(trace_path, series_to_frames(series, catalog))
        decoded = tmp_path / "decoded.csv"
        assert run("decode", "--dbc", tiny_dbc, "--trace", trace_path, "--out", decoded) == 0

        cfg = dict(TINY_CONFIG)
        cfg["dbc"] = str(tiny_dbc)
        cfg_path = tmp_path / "real.json"
        cfg_path.write_text(json.dumps(cfg))
        data = tmp_path / "realdata"
        assert run("gen", "--config", cfg_path, "--from-decoded", decoded, "--out", data) == 0
        from canids.traffic import load_windows

        ds = load_windows(data / "windows_train.bin")
        assert ds.signal_names == catalog.signal_names
        assert len(ds.windows) > 0

    def test_seed_override_changes_data(self, tmp_path, tiny_config):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run("gen", "--config", tiny_config, "--out", a) == 0
        assert run("gen", "--config", tiny_config, "--seed", 99, "--out", b) == 0
        assert (a / "windows_train.bin").read_bytes() != (b / "windows_train.bin").read_bytes()

    def test_eval_missing_checkpoint_names_path(self, tmp_path, tiny_config, capsys):
        data = tmp_path / "data"
        assert run("gen", "--config", tiny_config, "--out", data) == 0
        missing = tmp_path / "ghost.ckpt"
        code = run("eval", "--config", tiny_config, "--data", data,
                   "--model", missing, "--out", tmp_path / "ev")
        assert code == 1
        assert "ghost.ckpt" in capsys.readouterr().err


class TestConfig:
    def test_validation_collects_all_problems(self, tmp_path):
        bad = {
            "traffic": {"duration_s": 5.0, "rate_hz": 0.0, "seed": 1},
            "model": {"optimizer": "newton"},
            "attack": {"epsilons": []},
        }
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(bad))
        with pytest.raises(ConfigError) as err:
            load_config(path)
        text = str(err.value)
        for fragment in ("duration_s", "rate_hz", "optimizer", "epsilons"):
            assert fragment in text

    def test_defaults_validate(self):
        cfg = load_config(None)
        validate_config(cfg)

    def test_missing_config_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "ghost.json")

    def test_seed_override_rebases_all_seeds(self):
        cfg = load_config(None, seed_override=1000)
        seeds = [
            cfg["traffic"]["seed"], cfg["split"]["seed"], cfg["fdia"]["seed"],
            cfg["model"]["init_seed"], cfg["model"]["shuffle_seed"], cfg["defense"]["seed"],
        ]
        assert seeds == [1000, 1001, 1002, 1003, 1004, 1005]

    def test_usage_error_exit_code(self, capsys):
        assert main(["train"]) == 1  # missing required arguments
        assert "error" in capsys.readouterr().err

    def test_unknown_command_exit_code(self):
        assert main(["frobnicate"]) == 1
