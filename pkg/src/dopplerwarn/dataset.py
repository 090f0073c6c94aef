"""Windowing, train/test split and the spectrogram file format.

Spectrogram files are plain text::

    version=1
    center_frequency_hz=760000000.000000
    span_hz=1500.000000
    n_points=1001
    sweep_time_s=0.400000
    ...
    0.000000,no_activity,-110.123456,...,-109.876543
    0.400000,no_activity,...

Header lines are ``key=value``; every following line is one sweep:
timestamp, class name, then ``n_points`` power values in dBm, all with six
decimals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, FormatError
from .scenario import EventClass
from .synth import RadioConfig, Spectrogram

FORMAT_VERSION = 1

# header key -> (RadioConfig field, parser)
_RADIO_KEYS = {
    "center_frequency_hz": ("center_frequency", float),
    "span_hz": ("span", float),
    "n_points": ("n_points", int),
    "sweep_time_s": ("sweep_time", float),
    "resolution_bandwidth_hz": ("resolution_bandwidth", float),
    "tx_power_dbm": ("tx_power", float),
    "noise_floor_dbm": ("noise_floor", float),
    "drift_rate_hz_per_min": ("drift_rate", float),
}
_REQUIRED = ("version", "center_frequency_hz", "span_hz", "n_points", "sweep_time_s")
# optional per-recording metadata carried through the pipeline
_META_KEYS = {
    "event_class": str,
    "intersection_time_s": float,
    "source": str,
}


@dataclass(frozen=True)
class LabeledWindow:
    features: np.ndarray  # (time_step, n_features)
    label: EventClass
    origin: tuple[str, int]
    timestamp: float = 0.0  # timestamp of the last sweep in the window

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise DomainError("window features must be a (time_step >= 1, n_features) matrix")


@dataclass(frozen=True)
class SplitDataset:
    train: tuple[LabeledWindow, ...]
    test: tuple[LabeledWindow, ...]
    split_seed: int
    normalization: tuple[float, float]

    def arrays(self, part: str = "train") -> tuple[np.ndarray, np.ndarray]:
        """Stacked ``(X, y)`` with X shaped ``(n, time_step, n_features)``."""
        windows = getattr(self, part)
        if not windows:
            return np.empty((0, 0, 0)), np.empty(0, dtype=int)
        X = np.stack([w.features for w in windows])
        y = np.array([int(w.label) for w in windows], dtype=int)
        return X, y


def pool_features(matrix: np.ndarray, n_features: int) -> np.ndarray:
    """Max-pool the last axis into ``n_features`` contiguous groups.

    Group edges follow ``np.array_split``; spikes survive because each group
    keeps its strongest bin.
    """
    matrix = np.asarray(matrix, dtype=float)
    n = matrix.shape[-1]
    if n_features == n:
        return matrix.copy()
    if not 1 <= n_features <= n:
        raise DomainError(f"cannot pool {n} bins into {n_features} features")
    edges = np.array([len(a) for a in np.array_split(np.arange(n), n_features)]).cumsum()
    starts = np.concatenate([[0], edges[:-1]])
    return np.maximum.reduceat(matrix, starts, axis=-1)


def window(
    spec: Spectrogram,
    labels: Sequence[EventClass],
    time_step: int,
    spectrogram_id: str = "",
    n_features: int | None = None,
) -> list[LabeledWindow]:
    """Non-overlapping windows of ``time_step`` sweeps, labeled by their last sweep."""
    if time_step < 1:
        raise DomainError("time_step must be >= 1")
    if len(labels) != len(spec):
        raise DomainError(f"{len(labels)} labels for {len(spec)} snapshots")
    power = spec.power
    if n_features is not None and len(spec):
        power = pool_features(power, n_features)
    ts = spec.timestamps
    out = []
    for start in range(0, len(spec) - time_step + 1, time_step):
        end = start + time_step
        out.append(
            LabeledWindow(
                features=power[start:end].copy(),
                label=EventClass(labels[end - 1]),
                origin=(spectrogram_id, start),
                timestamp=float(ts[end - 1]),
            )
        )
    return out


def fit_normalization(windows: Iterable[LabeledWindow]) -> tuple[float, float]:
    lo, hi = math.inf, -math.inf
    for w in windows:
        lo = min(lo, float(w.features.min()))
        hi = max(hi, float(w.features.max()))
    if lo == math.inf:
        return 0.0, 1.0
    return lo, hi


def normalize(features: np.ndarray, normalization: tuple[float, float]) -> np.ndarray:
    lo, hi = normalization
    scale = hi - lo if hi > lo else 1.0
    return np.clip((np.asarray(features, dtype=float) - lo) / scale, 0.0, 1.0)


def _with_features(w: LabeledWindow, features: np.ndarray) -> LabeledWindow:
    return LabeledWindow(features, w.label, w.origin, w.timestamp)


def split(windows: Sequence[LabeledWindow], fraction: float = 0.80, seed: int = 0) -> SplitDataset:
    """Seeded random permutation; the first ``floor(fraction * n)`` windows train.

    Min-max normalization is fitted on the training part and applied to both
    parts (test values clamped to [0, 1]).
    """
    windows = list(windows)
    if len(windows) < 5:
        raise DomainError(f"need at least 5 windows to split, got {len(windows)}")
    if not 0.0 < fraction < 1.0:
        raise DomainError("fraction must lie in (0, 1)")
    order = np.random.default_rng(seed).permutation(len(windows))
    n_train = int(math.floor(fraction * len(windows) + 1e-9))
    train = [windows[i] for i in order[:n_train]]
    test = [windows[i] for i in order[n_train:]]
    norm = fit_normalization(train)
    return SplitDataset(
        train=tuple(_with_features(w, normalize(w.features, norm)) for w in train),
        test=tuple(_with_features(w, normalize(w.features, norm)) for w in test),
        split_seed=seed,
        normalization=norm,
    )


def _fmt(x: float) -> str:
    s = f"{x:.6f}"
    return "0.000000" if s == "-0.000000" else s


def write_spectrogram(path, spec: Spectrogram, labels: Sequence[EventClass]) -> None:
    if len(labels) != len(spec):
        raise DomainError(f"{len(labels)} labels for {len(spec)} snapshots")
    r = spec.radio
    lines = [f"version={FORMAT_VERSION}"]
    for key, (attr, kind) in _RADIO_KEYS.items():
        value = getattr(r, attr)
        lines.append(f"{key}={value}" if kind is int else f"{key}={_fmt(value)}")
    for key, kind in _META_KEYS.items():
        if key in spec.meta and spec.meta[key] is not None:
            value = spec.meta[key]
            lines.append(f"{key}={_fmt(value) if kind is float else value}")
    power = spec.power
    for t, lab, row in zip(spec.timestamps, labels, power):
        cells = [_fmt(t), EventClass(lab).wire_name]
        cells.extend(_fmt(v) for v in row)
        lines.append(",".join(cells))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_spectrogram(path) -> tuple[Spectrogram, list[EventClass]]:
    header: dict[str, str] = {}
    timestamps, labels, rows = [], [], []
    radio = None
    with open(path, encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if radio is None and "=" in line and "," not in line:
                key, _, value = line.partition("=")
                key = key.strip()
                if key != "version" and key not in _RADIO_KEYS and key not in _META_KEYS:
                    raise FormatError(f"unknown header key {key!r}", path, lineno)
                header[key] = value.strip()
                continue
            if radio is None:
                radio = _parse_header(header, path, lineno)
            cells = line.split(",")
            if len(cells) != radio.n_points + 2:
                raise FormatError(
                    f"expected {radio.n_points} power values, found {len(cells) - 2}", path, lineno
                )
            try:
                labels.append(EventClass.from_wire(cells[1]))
            except ValueError as exc:
                raise FormatError(str(exc), path, lineno) from None
            try:
                timestamps.append(float(cells[0]))
                rows.append([float(c) for c in cells[2:]])
            except ValueError as exc:
                raise FormatError(f"bad number: {exc}", path, lineno) from None
    if radio is None:
        radio = _parse_header(header, path, None)
    power = np.array(rows, dtype=float).reshape(len(rows), radio.n_points)
    meta = {k: _META_KEYS[k](v) for k, v in header.items() if k in _META_KEYS}
    return Spectrogram.from_matrix(radio, timestamps, power, meta=meta), labels


def _parse_header(header: dict, path, lineno) -> RadioConfig:
    missing = [k for k in _REQUIRED if k not in header]
    if missing:
        raise FormatError(f"malformed header, missing {', '.join(missing)}", path, lineno)
    if header["version"] != str(FORMAT_VERSION):
        raise FormatError(f"unsupported version {header['version']!r}", path, lineno)
    kwargs = {}
    for key, (attr, kind) in _RADIO_KEYS.items():
        if key in header:
            try:
                kwargs[attr] = kind(header[key])
            except ValueError:
                raise FormatError(f"bad value for {key}: {header[key]!r}", path, lineno) from None
    try:
        return RadioConfig(**kwargs)
    except ValueError as exc:
        raise FormatError(str(exc), path, lineno) from None
