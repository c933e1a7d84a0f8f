"""Detection metrics, optimizer comparison tables, and curve emission."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np
from sklearn.base import clone

from .validation import check_labels


@dataclass
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int
    wall_time_s: float = 0.0


def confusion_counts(y_true, y_pred) -> tuple[int, int, int, int]:
    """(tp, fp, tn, fn) with Attack (1) as the positive class."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    tp = int(((y_true == 1) & (y_pred == 1)).sum())
    fp = int(((y_true == 0) & (y_pred == 1)).sum())
    tn = int(((y_true == 0) & (y_pred == 0)).sum())
    fn = int(((y_true == 1) & (y_pred == 0)).sum())
    return tp, fp, tn, fn


def report_from_counts(tp, fp, tn, fn, wall_time_s=0.0) -> MetricsReport:
    total = tp + fp + tn + fn
    if total == 0:
        raise ValueError("empty dataset")
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return MetricsReport(
        accuracy=(tp + tn) / total,
        precision=precision,
        recall=recall,
        f1=f1,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        wall_time_s=wall_time_s,
    )


def compute_metrics(detector, X, y, wall_time_s: float = 0.0) -> MetricsReport:
    """Exact confusion-matrix metrics with Attack as the positive class."""
    y = check_labels(y, np.asarray(X).shape[0])
    y_pred = detector.predict(X)
    return report_from_counts(*confusion_counts(y, y_pred), wall_time_s=wall_time_s)


def macro_metrics(tp, fp, tn, fn) -> tuple[float, float, float]:
    """(precision, recall, f1) averaged over both classes."""
    pos = report_from_counts(tp, fp, tn, fn)
    neg = report_from_counts(tn, fn, tp, fp)  # Normal treated as positive
    p = (pos.precision + neg.precision) / 2
    r = (pos.recall + neg.recall) / 2
    f = (pos.f1 + neg.f1) / 2
    return p, r, f


def optimizer_comparison(
    detector_proto,
    X_train,
    y_train,
    X_val,
    y_val,
    X_test,
    y_test,
    optimizer_list,
) -> list[dict]:
    """Train one clone per optimizer from identical seeds; tabulate test metrics.

    Wall time covers the fit call only. Rows carry both positive-class and
    macro-averaged figures.
    """
    if not optimizer_list:
        raise ValueError("optimizer_list is empty")
    rows = []
    for kind in optimizer_list:
        det = clone(detector_proto)
        det.set_params(optimizer=kind)
        start = time.perf_counter()
        det.fit(X_train, y_train, validation_data=(X_val, y_val))
        elapsed = time.perf_counter() - start
        report = compute_metrics(det, X_test, y_test, wall_time_s=elapsed)
        macro_p, macro_r, macro_f = macro_metrics(report.tp, report.fp, report.tn, report.fn)
        rows.append(
            {
                "optimizer": kind,
                "accuracy": report.accuracy,
                "recall": report.recall,
                "precision": report.precision,
                "f1": report.f1,
                "time_s": elapsed,
                "recall_macro": macro_r,
                "precision_macro": macro_p,
                "f1_macro": macro_f,
            }
        )
    return rows


def emit_curves(history: dict, path) -> None:
    """Write per-epoch loss/accuracy curves: epoch,train_loss,train_acc,val_loss,val_acc."""
    epochs = len(history["train_loss"])
    if epochs == 0:
        raise ValueError("empty history")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "train_acc", "val_loss", "val_acc"])
        for e in range(epochs):
            writer.writerow(
                [
                    e + 1,
                    repr(history["train_loss"][e]),
                    repr(history["train_acc"][e]),
                    repr(history["val_loss"][e]),
                    repr(history["val_acc"][e]),
                ]
            )


def write_comparison_csv(rows: list[dict], path) -> None:
    fields = [
        "optimizer",
        "accuracy",
        "recall",
        "precision",
        "f1",
        "time_s",
        "recall_macro",
        "precision_macro",
        "f1_macro",
    ]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for row in rows:
            writer.writerow([row["optimizer"]] + [repr(float(row[f])) for f in fields[1:]])


def write_retrain_history_csv(history: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "train_acc", "val_clean_acc", "val_adv_acc", "attack_kind"])
        for row in history:
            writer.writerow(
                [
                    row["iteration"],
                    repr(row["train_acc"]),
                    repr(row["val_clean_acc"]),
                    repr(row["val_adv_acc"]),
                    row["attack_kind"],
                ]
            )


def write_sweep_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "kind", "epsilon", "alpha", "iterations",
                "success_rate", "post_attack_accuracy",
                "accuracy_normal", "accuracy_attack",
            ]
        )
        for row in rows:
            writer.writerow(
                [
                    row["kind"],
                    repr(float(row["epsilon"])),
                    repr(float(row["alpha"])),
                    row["iterations"],
                    repr(float(row["success_rate"])),
                    repr(float(row["post_attack_accuracy"])),
                    repr(float(row["accuracy_normal"])),
                    repr(float(row["accuracy_attack"])),
                ]
            )
