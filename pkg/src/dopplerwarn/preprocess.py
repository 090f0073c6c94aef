"""Spectrogram sanitizing: noise-floor clamping, drift correction, band cropping."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .synth import Snapshot, Spectrogram

EDGE_FRACTION = 0.10


def estimate_noise_floor(snapshot: Snapshot) -> float:
    """Median power (dBm) of the outer 10 % of bins on both edges.

    The lower median is used: it is an actual bin value, which makes
    clamping to it a fixed point (denoise is exactly idempotent).
    """
    p = np.asarray(snapshot.power)
    if p.size < 20:
        raise DomainError(f"need at least 20 bins to estimate the floor, got {p.size}")
    k = max(1, int(p.size * EDGE_FRACTION))
    edges = np.concatenate([p[:k], p[-k:]])
    return float(np.partition(edges, (edges.size - 1) // 2)[(edges.size - 1) // 2])


def _replace_power(snapshot: Snapshot, power: np.ndarray) -> Snapshot:
    return Snapshot(snapshot.timestamp, snapshot.freqs, power)


def _rebuild(spec: Spectrogram, snapshots) -> Spectrogram:
    return Spectrogram(spec.radio, tuple(snapshots), dict(spec.meta))


def denoise_snapshot(snapshot: Snapshot, threshold_offset_db: float = 6.0) -> Snapshot:
    floor = estimate_noise_floor(snapshot)
    p = np.array(snapshot.power, dtype=float)
    p[p < floor + threshold_offset_db] = floor
    return _replace_power(snapshot, p)


def denoise(spec: Spectrogram, threshold_offset_db: float = 6.0) -> Spectrogram:
    """Clamp every bin below ``floor + threshold_offset_db`` to the floor."""
    return _rebuild(spec, (denoise_snapshot(s, threshold_offset_db) for s in spec.snapshots))


@dataclass(frozen=True)
class LosTrack:
    los_bins: np.ndarray  # raw argmax per snapshot, -1 where flagged
    shifts: np.ndarray  # applied circular shift per snapshot
    flagged: np.ndarray  # True where no dominant LOS spike was found


def _running_median(values: np.ndarray, valid: np.ndarray, window: int) -> np.ndarray:
    out = np.zeros_like(values)
    idx = np.flatnonzero(valid)
    half = window // 2
    for pos, i in enumerate(idx):
        neigh = values[idx[max(0, pos - half) : pos + half + 1]]
        out[i] = int(np.round(np.median(neigh)))
    return out


def track_los(
    spec: Spectrogram,
    search_bins: int = 5,
    median_window: int = 5,
    min_dominance_db: float = 20.0,
) -> LosTrack:
    """Follow the LOS spike from sweep to sweep.

    The LOS is the strongest bin within ``search_bins`` of the previous
    estimate.  A snapshot is flagged when that peak does not stand at least
    ``min_dominance_db`` above the snapshot median.  Shifts are median
    filtered over valid snapshots and then limited to one bin of change per
    step.
    """
    n_snap = len(spec)
    los = np.full(n_snap, -1, dtype=int)
    flagged = np.zeros(n_snap, dtype=bool)
    if n_snap == 0:
        return LosTrack(los, np.zeros(0, dtype=int), flagged)
    power = spec.power
    n_bins = power.shape[1]
    center = (n_bins - 1) // 2
    prev = None
    for i, row in enumerate(power):
        if prev is None:
            lo, hi = 0, n_bins
        else:
            lo, hi = max(0, prev - search_bins), min(n_bins, prev + search_bins + 1)
        j = lo + int(np.argmax(row[lo:hi]))
        if row[j] - np.median(row) < min_dominance_db:
            flagged[i] = True
            continue
        los[i] = j
        prev = j

    valid = ~flagged
    raw_shift = np.where(valid, center - los, 0)
    shifts = _running_median(raw_shift, valid, median_window)
    last = None
    for i in np.flatnonzero(valid):
        if last is not None:
            shifts[i] = int(np.clip(shifts[i], last - 1, last + 1))
        last = shifts[i]
    shifts[flagged] = 0
    return LosTrack(los, shifts, flagged)


def correct_drift(spec: Spectrogram, search_bins: int = 5, median_window: int = 5) -> Spectrogram:
    """Circularly shift each sweep so the tracked LOS sits on the center bin.

    Snapshots without a dominant LOS are copied unshifted; their indices are
    recorded in ``meta["drift_flagged"]``.
    """
    track = track_los(spec, search_bins=search_bins, median_window=median_window)
    snaps = [
        _replace_power(s, np.roll(s.power, int(k))) for s, k in zip(spec.snapshots, track.shifts)
    ]
    out = _rebuild(spec, snaps)
    if track.flagged.any():
        out.meta["drift_flagged"] = [int(i) for i in np.flatnonzero(track.flagged)]
    return out


def crop_band(spec: Spectrogram, f_lo: float, f_hi: float) -> Spectrogram:
    """Keep the bins with ``f_lo <= freq <= f_hi``.

    The window must contain 0 Hz and select a symmetric set of bins so the
    cropped grid is still centered on the LOS.  Parts of the window beyond
    the span select nothing, so cropping again with a wider window is a
    no-op.
    """
    freqs = np.asarray(spec.freqs)
    if not f_lo < 0 < f_hi:
        raise DomainError("crop window must satisfy f_lo < 0 < f_hi")
    tol = 1e-6 * spec.radio.bin_width
    keep = (freqs >= f_lo - tol) & (freqs <= f_hi + tol)
    if not keep.any():
        raise DomainError("crop window selects no bins")
    kept = np.flatnonzero(keep)
    center = (freqs.size - 1) // 2
    if center - kept[0] != kept[-1] - center:
        raise DomainError(f"crop window [{f_lo}, {f_hi}] Hz is not symmetric on the bin grid")
    new_freqs = freqs[keep]
    radio = dataclasses.replace(
        spec.radio, span=float(new_freqs[-1] - new_freqs[0]), n_points=int(keep.sum())
    )
    snaps = [Snapshot(s.timestamp, new_freqs, np.asarray(s.power)[keep]) for s in spec.snapshots]
    return Spectrogram(radio, tuple(snaps), dict(spec.meta))


def sanitize(
    spec: Spectrogram,
    crop: tuple[float, float] | None = None,
    threshold_offset_db: float = 6.0,
    search_bins: int = 5,
) -> Spectrogram:
    """Drift correction, then denoising, then optional cropping."""
    out = denoise(correct_drift(spec, search_bins=search_bins), threshold_offset_db)
    if crop is not None:
        out = crop_band(out, *crop)
    return out
