"""CAN traffic decoding, LSTM attack detection, and adversarial hardening."""

from .attacks import AttackConfig, AttackOutcome, attack_success_rate, bim, epsilon_sweep, fgsm
from .dbc import SignalCatalog, cid_to_mid, decode_frame, encode_signals, parse_dbc
from .defense import RetrainConfig, RetrainState, adversarial_retrain, evaluate_robustness
from .detector import LstmDetector
from .fdia import FdiaConfig, craft_attack_dataset, inject_fdia
from .metrics import MetricsReport, compute_metrics, optimizer_comparison
from .preprocessing import RangeNormalizer
from .traffic import (
    DatasetSplit,
    Label,
    SampleWindow,
    build_windows,
    generate_trace,
    ingest_decoded_csv,
    resample_series,
    split_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "AttackConfig",
    "AttackOutcome",
    "DatasetSplit",
    "FdiaConfig",
    "Label",
    "LstmDetector",
    "MetricsReport",
    "RangeNormalizer",
    "RetrainConfig",
    "RetrainState",
    "SampleWindow",
    "SignalCatalog",
    "adversarial_retrain",
    "attack_success_rate",
    "bim",
    "build_windows",
    "cid_to_mid",
    "compute_metrics",
    "craft_attack_dataset",
    "decode_frame",
    "encode_signals",
    "epsilon_sweep",
    "evaluate_robustness",
    "fgsm",
    "generate_trace",
    "ingest_decoded_csv",
    "inject_fdia",
    "optimizer_comparison",
    "parse_dbc",
    "resample_series",
    "split_dataset",
]
