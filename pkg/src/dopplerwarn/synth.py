"""Spectrum-analyzer-like Doppler snapshots for a scenario.

Each sweep is composed in linear power (mW) and converted to dBm:

* receiver noise: ``noise_floor`` with a log-normal jitter per bin,
* LOS spike at 0 Hz,
* NLOS plateau filling ``[-Δf_max, +Δf_max]`` with log-normal ripple,
* the oncoming-vehicle spike at the bistatic Doppler shift while it lies
  outside the plateau.

All deterministic components are offset by the slow instrument drift
``drift_rate * t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError
from .scenario import (
    EventClass,
    ScenarioConfig,
    SpikeRegion,
    band_edge,
    bistatic_doppler,
    classify_spike_region,
    ground_truth_labels,
)


@dataclass(frozen=True)
class RadioConfig:
    center_frequency: float = 760e6
    span: float = 1500.0
    n_points: int = 1001
    resolution_bandwidth: float = 10.0
    sweep_time: float = 0.40
    tx_power: float = 20.0
    noise_floor: float = -110.0
    drift_rate: float = 0.5  # Hz per minute

    def __post_init__(self):
        if self.n_points < 3 or self.n_points % 2 == 0:
            raise ConfigError(f"n_points must be odd and >= 3, got {self.n_points}")
        if self.span <= 0:
            raise ConfigError("span must be positive")
        if self.resolution_bandwidth > self.span / self.n_points * 10:
            raise ConfigError(
                f"resolution bandwidth {self.resolution_bandwidth} Hz too wide for "
                f"{self.n_points} points over {self.span} Hz"
            )

    @property
    def bin_width(self) -> float:
        return self.span / (self.n_points - 1)

    @property
    def center_bin(self) -> int:
        return (self.n_points - 1) // 2

    def freqs(self) -> np.ndarray:
        k = np.arange(self.n_points) - self.center_bin
        return k * self.bin_width


PROFILES = {
    "760mhz": RadioConfig(center_frequency=760e6, span=1500.0),
    "2.5ghz": RadioConfig(center_frequency=2.5e9, span=2000.0),
}


@dataclass(frozen=True)
class SynthLevels:
    """Component power levels (dBm) and shape parameters of the model."""

    los_power: float = -40.0
    plateau_power: float = -65.0
    spike_power: float = -75.0
    ripple_db: float = 2.0
    noise_jitter_db: float = 1.0
    kernel_bins: float = 0.5  # Gaussian sigma of LOS/vehicle spikes, in bins


@dataclass(frozen=True)
class Snapshot:
    timestamp: float
    freqs: np.ndarray
    power: np.ndarray

    def __post_init__(self):
        if self.freqs.shape != self.power.shape:
            raise DomainError("freqs and power must have equal length")


@dataclass(frozen=True)
class Spectrogram:
    radio: RadioConfig
    snapshots: tuple[Snapshot, ...] = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "snapshots", tuple(self.snapshots))

    def __len__(self):
        return len(self.snapshots)

    @property
    def freqs(self) -> np.ndarray:
        if self.snapshots:
            return self.snapshots[0].freqs
        return self.radio.freqs()

    @property
    def timestamps(self) -> np.ndarray:
        return np.array([s.timestamp for s in self.snapshots], dtype=float)

    @property
    def power(self) -> np.ndarray:
        """Power matrix, shape ``(n_snapshots, n_bins)``."""
        if not self.snapshots:
            return np.empty((0, len(self.freqs)))
        return np.stack([s.power for s in self.snapshots])

    @classmethod
    def from_matrix(cls, radio, timestamps, power, freqs=None, meta=None) -> "Spectrogram":
        freqs = radio.freqs() if freqs is None else np.asarray(freqs, dtype=float)
        power = np.asarray(power, dtype=float)
        snaps = [Snapshot(float(t), freqs, row.copy()) for t, row in zip(timestamps, power)]
        return cls(radio, snaps, dict(meta or {}))


def _kernel(offsets: np.ndarray, sigma: float) -> np.ndarray:
    return np.exp(-0.5 * (offsets / sigma) ** 2)


def _db_to_mw(db):
    return 10.0 ** (np.asarray(db) / 10.0)


def snapshot_seed(rng_seed: int, index: int) -> int:
    """Per-snapshot seed derived from ``(rng_seed, index)``."""
    return int(np.random.SeedSequence([rng_seed, index]).generate_state(1, dtype=np.uint64)[0])


def synth_snapshot(
    scenario: ScenarioConfig,
    radio: RadioConfig,
    t: float,
    rng_seed: int,
    levels: SynthLevels = SynthLevels(),
) -> Snapshot:
    if not 0.0 <= t <= scenario.duration:
        raise DomainError(f"t = {t} s outside [0, {scenario.duration}] s")
    rng = np.random.default_rng(rng_seed)
    freqs = radio.freqs()
    drift = radio.drift_rate * t / 60.0
    f = freqs - drift
    sigma = levels.kernel_bins * radio.bin_width

    noise = _db_to_mw(radio.noise_floor + levels.noise_jitter_db * rng.standard_normal(freqs.size))
    ripple = levels.ripple_db * rng.standard_normal(freqs.size)

    total = noise + _db_to_mw(levels.los_power) * _kernel(f, sigma)
    dfm = band_edge(scenario, t)
    if dfm > 0:
        band = np.abs(f) <= dfm
        total[band] += _db_to_mw(levels.plateau_power + ripple[band])
    if scenario.oncoming is not None:
        fd = bistatic_doppler(scenario, t)
        if classify_spike_region(fd, dfm) is not SpikeRegion.IN_BAND:
            total += _db_to_mw(levels.spike_power) * _kernel(f - fd, sigma)
    return Snapshot(float(t), freqs, 10.0 * np.log10(total))


def synth_spectrogram(
    scenario: ScenarioConfig,
    radio: RadioConfig,
    rng_seed: int,
    levels: SynthLevels = SynthLevels(),
) -> tuple[Spectrogram, list[EventClass]]:
    """Synthesize one sweep per snapshot period plus the ground-truth labels."""
    times = scenario.snapshot_times()
    snaps = [
        synth_snapshot(scenario, radio, float(t), snapshot_seed(rng_seed, i), levels)
        for i, t in enumerate(times)
    ]
    labels = ground_truth_labels(scenario, times)
    return Spectrogram(radio, snaps), labels
