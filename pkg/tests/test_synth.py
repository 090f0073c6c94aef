import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import KMH_120, cruise, parked, pass_by
from dopplerwarn.errors import ConfigError, DomainError
from dopplerwarn.scenario import band_edge, bistatic_doppler, max_doppler_shift
from dopplerwarn.synth import PROFILES, RadioConfig, SynthLevels, synth_snapshot, synth_spectrogram

STILL = dataclasses.replace(PROFILES["760mhz"], drift_rate=0.0)


def test_profiles_match_analyzer_settings():
    r = PROFILES["760mhz"]
    assert (r.center_frequency, r.span, r.n_points, r.resolution_bandwidth, r.sweep_time, r.tx_power) == (
        760e6, 1500.0, 1001, 10.0, 0.40, 20.0
    )
    r = PROFILES["2.5ghz"]
    assert (r.center_frequency, r.span, r.n_points) == (2.5e9, 2000.0, 1001)


def test_freq_grid_symmetric():
    f = PROFILES["760mhz"].freqs()
    assert f.size == 1001
    assert f[500] == 0.0
    assert np.all(np.diff(f) > 0)
    np.testing.assert_allclose(f, -f[::-1])
    assert f[-1] == pytest.approx(750.0)


@pytest.mark.parametrize("kw", [{"n_points": 1000}, {"n_points": 1}, {"span": 0.0}, {"resolution_bandwidth": 100.0}])
def test_radio_config_validation(kw):
    with pytest.raises(ConfigError):
        RadioConfig(**kw)


def test_ten_seconds_gives_25_snapshots():
    # 10 s at one sweep per 0.40 s
    spec, labels = synth_spectrogram(cruise(duration=10.0), STILL, rng_seed=1)
    assert len(spec) == 25 and len(labels) == 25
    np.testing.assert_allclose(np.diff(spec.timestamps), 0.4)


def test_zero_duration_is_empty():
    spec, labels = synth_spectrogram(cruise(duration=0.0), STILL, rng_seed=1)
    assert len(spec) == 0 and labels == []
    assert spec.power.shape == (0, 1001)


def test_time_out_of_range():
    with pytest.raises(DomainError):
        synth_snapshot(cruise(), STILL, 10.5, 0)


def test_static_scene_has_only_los():
    snap = synth_snapshot(parked(), STILL, 2.0, rng_seed=3)
    p = snap.power
    assert int(np.argmax(p)) == 500
    assert p[500] == pytest.approx(-40.0, abs=0.1)
    # everything a few bins away from the LOS is receiver noise
    away = np.abs(np.arange(1001) - 500) > 3
    assert np.all(p[away] < -110 + 6)
    assert np.median(p[away]) == pytest.approx(-110.0, abs=0.5)


def _band_edges(freqs, power, threshold=-90.0):
    inside = np.flatnonzero(power > threshold)
    return freqs[inside[0]], freqs[inside[-1]]


def test_plateau_edges_at_quoted_bound():
    # 120 km/h each at 760 MHz: plateau edge at +-169 Hz within one bin
    radio = STILL
    snap = synth_snapshot(cruise(), radio, 0.0, rng_seed=7)
    lo, hi = _band_edges(snap.freqs, snap.power)
    assert lo == pytest.approx(-169.0, abs=radio.bin_width)
    assert hi == pytest.approx(169.0, abs=radio.bin_width)
    assert hi == pytest.approx(max_doppler_shift(KMH_120, KMH_120, 760e6), abs=radio.bin_width)


def test_plateau_level_below_los():
    snap = synth_snapshot(cruise(), STILL, 0.0, rng_seed=7)
    band = (np.abs(snap.freqs) < 150) & (np.abs(snap.freqs) > 10)
    gap = snap.power[500] - np.median(snap.power[band])
    assert 15 <= gap <= 30


def test_vehicle_spike_outside_band_matches_bistatic():
    scen = pass_by()
    t = 1.0
    f_d = bistatic_doppler(scen, t)
    assert f_d > band_edge(scen, t)
    snap = synth_snapshot(scen, STILL, t, rng_seed=11)
    outside = np.abs(snap.freqs) > band_edge(scen, t) + 2 * STILL.bin_width
    k = np.flatnonzero(outside)[np.argmax(snap.power[outside])]
    assert snap.freqs[k] == pytest.approx(f_d, abs=STILL.bin_width)
    assert snap.freqs[k] > 169.0
    # spike is above the floor and below the plateau
    band = np.abs(snap.freqs) < 150
    assert -110 < snap.power[k] < np.median(snap.power[band & (np.abs(snap.freqs) > 10)])


def test_same_seed_bit_identical():
    a, la = synth_spectrogram(pass_by(), PROFILES["760mhz"], rng_seed=99)
    b, lb = synth_spectrogram(pass_by(), PROFILES["760mhz"], rng_seed=99)
    assert np.array_equal(a.power, b.power) and la == lb
    c, _ = synth_spectrogram(pass_by(), PROFILES["760mhz"], rng_seed=100)
    assert not np.array_equal(a.power, c.power)


def test_snapshots_independent_of_neighbours():
    # per-snapshot seeds: a longer run shares its prefix with a shorter one
    short, _ = synth_spectrogram(pass_by(duration=4.0, meet=3.0), STILL, rng_seed=5)
    long, _ = synth_spectrogram(pass_by(duration=8.0, meet=3.0), STILL, rng_seed=5)
    assert np.array_equal(short.power, long.power[: len(short)])


@settings(max_examples=15)
@given(st.integers(0, 2**31 - 1), st.sampled_from(["760mhz", "2.5ghz"]))
def test_los_is_global_argmax(seed, profile):
    radio = PROFILES[profile]
    scen = pass_by(f_c=radio.center_frequency, meet=5.0)
    spec, _ = synth_spectrogram(scen, radio, rng_seed=seed)
    drift_bins = radio.drift_rate * spec.timestamps / 60.0 / radio.bin_width
    assert np.all(drift_bins < 1.0)
    expected = radio.center_bin + np.round(drift_bins).astype(int)
    assert np.array_equal(np.argmax(spec.power, axis=1), expected)


@settings(max_examples=15)
@given(
    seed=st.integers(0, 2**31 - 1),
    profile=st.sampled_from(["760mhz", "2.5ghz"]),
    v_o=st.floats(10.0, 25.0),
    meet=st.floats(2.0, 8.0),
)
def test_vehicle_ridge_tracks_bistatic(seed, profile, v_o, meet):
    radio = dataclasses.replace(PROFILES[profile], drift_rate=0.0)
    scen = pass_by(f_c=radio.center_frequency, v_o=v_o, meet=meet)
    spec, _ = synth_spectrogram(scen, radio, rng_seed=seed)
    bw = radio.bin_width
    freqs = spec.freqs
    checked = 0
    for t, row in zip(spec.timestamps, spec.power):
        f_d, edge = bistatic_doppler(scen, t), band_edge(scen, t)
        if abs(f_d) <= edge + 2 * bw or abs(f_d) > freqs[-1] - bw:
            continue
        outside = np.abs(freqs) > edge + bw
        k = np.flatnonzero(outside)[np.argmax(row[outside])]
        assert abs(freqs[k] - f_d) <= bw
        checked += 1
    assert checked > 0


def _plateau_power_db(snap, edge):
    band = (np.abs(snap.freqs) <= edge) & (np.abs(snap.freqs) > 5)
    return 10 * np.log10(np.sum(10 ** (snap.power[band] / 10)))


@given(st.integers(0, 2**31 - 1), st.integers(0, 2**31 - 1))
def test_plateau_integral_seed_invariant(s1, s2):
    scen = cruise()
    edge = band_edge(scen, 1.0)
    a = _plateau_power_db(synth_snapshot(scen, STILL, 1.0, s1), edge)
    b = _plateau_power_db(synth_snapshot(scen, STILL, 1.0, s2), edge)
    assert abs(a - b) <= 1.0


def test_custom_levels():
    levels = SynthLevels(los_power=-30.0)
    snap = synth_snapshot(parked(), STILL, 0.0, 0, levels)
    assert snap.power[500] == pytest.approx(-30.0, abs=0.1)
