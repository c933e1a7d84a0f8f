"""Synthetic trace generation, log ingestion, windowing, splits, persistence.

A trace is a :class:`SignalSeries` (per-signal timestamped observations),
resampled onto a uniform :class:`SampleGrid` by carrying the last observation
forward, then cut into fixed-duration overlapping :class:`SampleWindow`
samples. Values stay in physical units end to end; normalization for the
detector lives in :mod:`canids.preprocessing`.
"""

from __future__ import annotations

import csv
import struct
import warnings
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .dbc import CanFrame, SignalCatalog, encode_signals
from .validation import check_ranges


class TrafficError(ValueError):
    """Configuration or data problem while building a dataset."""


class Label(IntEnum):
    NORMAL = 0
    ATTACK = 1


@dataclass
class SignalSeries:
    """Per-signal (timestamps, values) observations, in catalog signal order."""

    signals: dict[str, tuple[np.ndarray, np.ndarray]]

    @property
    def names(self) -> list[str]:
        return list(self.signals)

    def duration(self) -> float:
        return max(t[-1] for t, _ in self.signals.values())


@dataclass
class SampleGrid:
    """Uniform lattice of signal values: times (n,) by values (n, d)."""

    times: np.ndarray
    values: np.ndarray
    signal_names: list[str]
    rate_hz: float


@dataclass
class SampleWindow:
    X: np.ndarray  # (T, d) physical units
    start_time: float
    label: int = Label.NORMAL
    duration_s: float = 10.0

    def copy(self) -> "SampleWindow":
        return SampleWindow(self.X.copy(), self.start_time, self.label, self.duration_s)


@dataclass
class DatasetSplit:
    train: list[SampleWindow]
    validation: list[SampleWindow]
    test: list[SampleWindow]
    split_seed: int


@dataclass
class WindowDataset:
    """Windows plus the column metadata needed to interpret them."""

    signal_names: list[str]
    mins: np.ndarray
    maxs: np.ndarray
    windows: list[SampleWindow]

    def __post_init__(self):
        self.mins, self.maxs = check_ranges(self.mins, self.maxs)

    def to_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        X = np.stack([w.X for w in self.windows])
        y = np.array([int(w.label) for w in self.windows], dtype=np.int64)
        return X, y


def windows_to_arrays(windows: list[SampleWindow]) -> tuple[np.ndarray, np.ndarray]:
    X = np.stack([w.X for w in windows])
    y = np.array([int(w.label) for w in windows], dtype=np.int64)
    return X, y


def generate_trace(
    catalog: SignalCatalog,
    duration: float,
    seed: int,
    rate_hz: float = 10.0,
    base_band: tuple[float, float] = (0.05, 0.2),
    walk_sigma: float = 0.005,
    walk_band: float = 0.08,
    wave_amp: tuple[float, float] = (0.02, 0.06),
    wave_freq: tuple[float, float] = (0.02, 0.2),
    wave_components: int = 2,
    transient_rate: float = 0.02,
    transient_amp: tuple[float, float] = (0.25, 0.6),
    transient_dur: tuple[float, float] = (0.5, 2.5),
    dither_rate: float = 0.0,
    dither_amp: tuple[float, float] = (0.05, 0.2),
    dither_dur: tuple[float, float] = (0.5, 2.0),
    jitter_sigma: float = 0.0005,
) -> SignalSeries:
    """Generate a piecewise-smooth random trace for every catalog signal.

    Each signal idles at an operating point drawn from ``base_band``
    (fractions of its physical range; the default mimics real drive signals
    like RPM or speed, which sit low in their DBC span) plus a bounded
    random walk and a few slow sinusoids, and occasionally ramps through a
    smooth transient (a throttle-blip-style excursion at ``transient_rate``
    events per second), all clamped to the physical range. Deterministic
    for a given seed. The sigma/band/amp knobs are range fractions
    controlling how lively clean traffic looks.
    """
    if duration <= 10.0:
        raise TrafficError(f"duration must exceed 10 s, got {duration}")
    n = int(round(duration * rate_hz))
    times = np.arange(n, dtype=np.float64) / rate_hz
    master = np.random.default_rng(seed)
    series: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for name in catalog.signal_names:
        rng = np.random.default_rng(master.integers(0, 2**63 - 1))
        lo, hi = catalog.range_of(name)
        span = hi - lo
        base = lo + rng.uniform(*base_band) * span
        walk = np.cumsum(rng.normal(0.0, walk_sigma * span, size=n))
        # soft-bound the walk inside +-walk_band of the operating point
        walk = walk_band * span * np.tanh(walk / (walk_band * span + 1e-300))
        wave = np.zeros(n)
        for _ in range(wave_components):
            freq = rng.uniform(*wave_freq)
            amp = rng.uniform(*wave_amp) * span
            phase = rng.uniform(0.0, 2.0 * np.pi)
            wave += amp * np.sin(2.0 * np.pi * freq * times + phase)
        bumps = np.zeros(n)
        for _ in range(rng.poisson(transient_rate * duration)):
            start = rng.uniform(0.0, duration)
            dur = rng.uniform(*transient_dur)
            amp = rng.uniform(*transient_amp) * span
            inside = (times >= start) & (times < start + dur)
            # half-cosine-squared pulse: smooth entry and exit
            bumps[inside] += amp * np.sin(np.pi * (times[inside] - start) / dur) ** 2
        for _ in range(rng.poisson(dither_rate * duration)):
            start = rng.uniform(0.0, duration)
            dur = rng.uniform(*dither_dur)
            amp = rng.uniform(*dither_amp) * span
            inside = (times >= start) & (times < start + dur)
            # rough sensor-noise burst around the current level
            bumps[inside] += rng.uniform(-amp, amp, size=int(inside.sum()))
        jitter = rng.normal(0.0, jitter_sigma * span, size=n)
        values = np.clip(base + walk + wave + bumps + jitter, lo, hi)
        series[name] = (times.copy(), values)
    return SignalSeries(series)


def resample_series(series: SignalSeries, rate_hz: float, t_start: float | None = None) -> SampleGrid:
    """Forward-fill every signal onto a uniform grid at ``rate_hz``.

    The grid starts at the latest first-observation time across signals (so
    each point has something to carry forward) unless ``t_start`` is given,
    and extends to the last observation anywhere in the series.
    """
    if not series.signals:
        raise TrafficError("empty series")
    firsts = [t[0] for t, _ in series.signals.values()]
    if t_start is None:
        t_start = max(firsts)
    t_end = max(t[-1] for t, _ in series.signals.values())
    n = int(np.floor((t_end - t_start) * rate_hz + 1e-6)) + 1
    if n < 1:
        raise TrafficError("grid is empty; t_start is past the series end")
    grid_t = t_start + np.arange(n, dtype=np.float64) / rate_hz
    values = np.empty((n, len(series.signals)), dtype=np.float64)
    for j, (name, (t, v)) in enumerate(series.signals.items()):
        idx = np.searchsorted(t, grid_t, side="right") - 1
        if (idx < 0).any():
            raise TrafficError(f"{name}: grid point precedes first observation")
        values[:, j] = v[idx]
    return SampleGrid(grid_t, values, series.names, rate_hz)


def build_windows(
    grid: SampleGrid, window_s: float = 10.0, stride_s: float = 1.0
) -> list[SampleWindow]:
    """Cut the grid into overlapping windows, all labeled Normal.

    Window count is ``floor((duration - window_s) / stride_s) + 1``.
    """
    window_pts = int(round(window_s * grid.rate_hz))
    stride_pts = int(round(stride_s * grid.rate_hz))
    if window_pts < 1 or stride_pts < 1:
        raise TrafficError("window and stride must each cover at least one grid step")
    n = grid.values.shape[0]
    if n < window_pts:
        raise TrafficError(f"grid has {n} points, window needs {window_pts}")
    count = (n - window_pts) // stride_pts + 1
    return [
        SampleWindow(
            X=grid.values[k * stride_pts : k * stride_pts + window_pts].copy(),
            start_time=float(grid.times[k * stride_pts]),
            label=Label.NORMAL,
            duration_s=window_s,
        )
        for k in range(count)
    ]


def split_dataset(samples: list[SampleWindow], seed: int) -> DatasetSplit:
    """Shuffle and partition 80/10/10; remainders go to training."""
    n = len(samples)
    if n < 10:
        raise TrafficError(f"need at least 10 samples to split, got {n}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_val = n // 10
    n_test = n // 10
    n_train = n - n_val - n_test
    train = [samples[i] for i in order[:n_train]]
    val = [samples[i] for i in order[n_train : n_train + n_val]]
    test = [samples[i] for i in order[n_train + n_val :]]
    return DatasetSplit(train, val, test, split_seed=seed)


def ingest_decoded_csv(path, catalog: SignalCatalog) -> SignalSeries:
    """Load a decoded log (``timestamp,signal_name,value``) as a series.

    Rows are grouped per signal and sorted by timestamp; duplicate timestamps
    keep the last value seen, with a warning.
    """
    buckets: dict[str, list[tuple[float, float]]] = {n: [] for n in catalog.signal_names}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        for row in reader:
            if not row:
                continue
            t, name, value = float(row[0]), row[1], float(row[2])
            if name not in buckets:
                raise TrafficError(f"unknown signal name {name!r}")
            buckets[name].append((t, value))
    signals: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for name, rows in buckets.items():
        if not rows:
            continue
        rows.sort(key=lambda r: r[0])
        times = np.array([r[0] for r in rows])
        values = np.array([r[1] for r in rows])
        keep = np.ones(len(rows), dtype=bool)
        keep[:-1] = times[:-1] != times[1:]  # last wins on duplicates
        if not keep.all():
            warnings.warn(f"{name}: dropped {int((~keep).sum())} duplicate timestamps")
        signals[name] = (times[keep], values[keep])
    if not signals:
        raise TrafficError("decoded log contains no known signals")
    return SignalSeries(signals)


def write_decoded_csv(path, rows: list[tuple[float, str, float]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "signal_name", "value"])
        for t, name, value in rows:
            writer.writerow([repr(t), name, repr(value)])


def quantize_series(series: SignalSeries, catalog: SignalCatalog) -> SignalSeries:
    """Snap every value to its signal's representable raw grid.

    This is exactly what a value survives when encoded into a frame and
    decoded back, so it serves as ground truth for codec round trips.
    """
    out = {}
    for name, (t, v) in series.signals.items():
        sig = catalog.signal(name)
        raw = np.round((v - sig.offset) / sig.scale)
        out[name] = (t.copy(), raw * sig.scale + sig.offset)
    return SignalSeries(out)


def series_to_frames(series: SignalSeries, catalog: SignalCatalog) -> list[CanFrame]:
    """Encode an aligned series into raw frames, one per message per tick."""
    frames: list[CanFrame] = []
    for mid, message in catalog.messages.items():
        names = [s.name for s in message.signals if s.name in series.signals]
        if not names:
            continue
        times0 = series.signals[names[0]][0]
        for name in names[1:]:
            if not np.array_equal(series.signals[name][0], times0):
                raise TrafficError(f"signals of message {message.name} are not aligned")
        for k, t in enumerate(times0):
            values = {name: float(series.signals[name][1][k]) for name in names}
            frames.append(CanFrame(mid, float(t), encode_signals(values, message)))
    frames.sort(key=lambda f: (f.timestamp, f.can_id))
    return frames


_MAGIC = b"CANWIN01"
_VERSION = 1


def save_windows(path, dataset: WindowDataset) -> None:
    """Write a window dataset in the flat binary container (see README)."""
    windows = dataset.windows
    if windows:
        T, d = windows[0].X.shape
        duration = windows[0].duration_s
    else:
        T, d, duration = 0, len(dataset.signal_names), 10.0
    if d != len(dataset.signal_names):
        raise TrafficError("window width does not match signal name list")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIII", _VERSION, len(windows), T, d))
        fh.write(struct.pack("<d", duration))
        for j, name in enumerate(dataset.signal_names):
            blob = name.encode("utf-8")
            fh.write(struct.pack("<H", len(blob)))
            fh.write(blob)
            fh.write(struct.pack("<dd", dataset.mins[j], dataset.maxs[j]))
        for w in windows:
            if w.X.shape != (T, d):
                raise TrafficError("all windows in a dataset must share one shape")
            fh.write(struct.pack("<dB", w.start_time, int(w.label)))
            fh.write(np.ascontiguousarray(w.X, dtype="<f8").tobytes())


def load_windows(path) -> WindowDataset:
    with open(path, "rb") as fh:
        if fh.read(8) != _MAGIC:
            raise TrafficError(f"{path}: not a window dataset file")
        version, n, T, d = struct.unpack("<IIII", fh.read(16))
        if version != _VERSION:
            raise TrafficError(f"{path}: unsupported dataset version {version}")
        (duration,) = struct.unpack("<d", fh.read(8))
        names, mins, maxs = [], np.empty(d), np.empty(d)
        for j in range(d):
            (name_len,) = struct.unpack("<H", fh.read(2))
            names.append(fh.read(name_len).decode("utf-8"))
            mins[j], maxs[j] = struct.unpack("<dd", fh.read(16))
        windows = []
        for _ in range(n):
            start_time, label = struct.unpack("<dB", fh.read(9))
            X = np.frombuffer(fh.read(T * d * 8), dtype="<f8").reshape(T, d).copy()
            windows.append(SampleWindow(X, start_time, int(label), duration))
    return WindowDataset(names, mins, maxs, windows)
