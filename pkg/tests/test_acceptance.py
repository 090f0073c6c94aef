"""Acceptance criteria 1-8; each test records one PASS/FAIL line for the summary."""

import time
from pathlib import Path

import numpy as np
import pytest

import conftest
from dopplerwarn import evaluate as ev
from dopplerwarn.cli import main
from dopplerwarn.experiment import ExperimentConfig, run_experiment
from dopplerwarn.models import CnnConfig, LstmConfig, gradient_check
from dopplerwarn.preprocess import correct_drift, denoise, sanitize
from dopplerwarn.scenario import EventClass, ScenarioRanges, band_edge, max_doppler_shift, random_scenario
from dopplerwarn.synth import PROFILES, synth_spectrogram

from conftest import KMH_120, cruise, parked, pass_by

A, D = EventClass.VEHICLE_APPROACHING, EventClass.VEHICLE_DRIVING_AWAY


def record(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({detail})"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)


def test_criterion_1_doppler_bounds():
    f760 = max_doppler_shift(KMH_120, KMH_120, 760e6)
    f25 = max_doppler_shift(24.1, 24.1, 2.5e9)
    ok = abs(f760 - 169.0) <= 1.0 and abs(f25 - 402.0) <= 1.0
    record(1, "Doppler band bounds", ok, f"{f760:.2f} Hz, {f25:.2f} Hz")
    assert ok


def _ridge(spec, scenario, labels):
    """Strongest out-of-band bin per snapshot that survived denoising."""
    bw = spec.radio.bin_width
    ridge = []
    for t, row, label in zip(spec.timestamps, spec.power, labels):
        edge = band_edge(scenario, t)
        outside = np.abs(spec.freqs) > edge + 2 * bw
        k = np.flatnonzero(outside)[np.argmax(row[outside])]
        if row[k] > row.min():
            ridge.append((spec.freqs[k], edge, label))
    return ridge


def test_criterion_2_doppler_signature_shape():
    t0 = time.perf_counter()
    radio = PROFILES["760mhz"]
    rng = np.random.default_rng(2)
    # long enough for the oncoming vehicle to clear T_X as well
    ranges = ScenarioRanges(meet_fraction=(0.4, 0.6))
    failures = []
    n = 20
    for i in range(n):
        scen = random_scenario(A, rng, radio.center_frequency, 20.0, ranges=ranges)
        raw, labels = synth_spectrogram(scen, radio, rng_seed=i)
        ridge = _ridge(sanitize(raw), scen, labels)
        freqs = np.array([f for f, _, _ in ridge])
        approach = [(f, e) for f, e, lab in ridge if lab is A]
        away = [(f, e) for f, e, lab in ridge if lab is D]
        checks = (
            bool(approach) and all(f > e for f, e in approach),
            freqs.size > 1 and bool(np.all(np.diff(freqs) <= radio.bin_width)),
            bool(away) and all(f < -e for f, e in away),
        )
        if not all(checks):
            failures.append((i, checks))
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 10.0
    record(2, "pass-by ridge shape", ok, f"{n - len(failures)}/{n} scenarios, {elapsed:.1f} s")
    assert not failures, failures
    assert elapsed < 10.0


def test_criterion_3_preprocessing():
    t0 = time.perf_counter()
    radio = PROFILES["760mhz"]
    assert radio.drift_rate == 0.5
    scenarios = [cruise(duration=600.0), parked(duration=600.0), pass_by(duration=600.0, meet=300.0)]
    centred = total = 0
    idempotent = True
    for seed, scen in enumerate(scenarios):
        spec, _ = synth_spectrogram(scen, radio, rng_seed=seed)
        fixed = correct_drift(spec)
        los = np.argmax(fixed.power, axis=1)
        centred += int(np.sum(np.abs(los - radio.center_bin) <= 1))
        total += len(los)
        once = denoise(spec)
        idempotent &= bool(np.array_equal(denoise(once).power, once.power))
        once = denoise(fixed)
        idempotent &= bool(np.array_equal(denoise(once).power, once.power))
    elapsed = time.perf_counter() - t0
    frac = centred / total
    ok = frac >= 0.99 and idempotent and elapsed < 10.0
    record(3, "drift correction and denoise", ok,
           f"{frac:.2%} of {total} snapshots recentred, idempotent={idempotent}, {elapsed:.1f} s")
    assert frac >= 0.99 and idempotent
    assert elapsed < 10.0


def test_criterion_4_gradient_check():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    lstm = LstmConfig(layers=2, hidden_nodes=3, time_step=3, n_features=4, seed=5)
    cnn = CnnConfig(conv_layers=2, filters=(2, 2), time_step=5, n_features=8, seed=5)
    e_lstm = gradient_check(lstm, (rng.normal(size=(3, 3, 4)), np.array([0, 2, 3])))
    e_cnn = gradient_check(cnn, (rng.normal(size=(2, 5, 8)), np.array([1, 3])))
    elapsed = time.perf_counter() - t0
    ok = e_lstm < 1e-4 and e_cnn < 1e-4 and elapsed < 60.0
    record(4, "gradient check", ok, f"lstm {e_lstm:.2e}, cnn {e_cnn:.2e}, {elapsed:.1f} s")
    assert ok


def _brute_force(pred, truth):
    out = []
    for k in range(4):
        tp = tn = fp = fn = 0
        for p, t in zip(pred, truth):
            if p == k and t == k:
                tp += 1
            elif p == k:
                fp += 1
            elif t == k:
                fn += 1
            else:
                tn += 1
        ratio = lambda a, b: ev.UNDEFINED if b == 0 else a / b  # noqa: E731
        out.append((tp, tn, fp, fn, ratio(tp + tn, tp + tn + fp + fn), ratio(tp, tp + fp),
                    ratio(tp, tp + fn), ratio(tn, tn + fp)))
    return out


def _pairwise_auc(scores, truth):
    pos, neg = scores[truth], scores[~truth]
    wins = 0.0
    for p in pos:
        for q in neg:
            wins += 1.0 if p > q else 0.5 if p == q else 0.0
    return wins / (len(pos) * len(neg))


def test_criterion_5_metric_oracles():
    rng = np.random.default_rng(5)
    pred, truth = rng.integers(0, 4, 1000), rng.integers(0, 4, 1000)
    c = ev.confusion(pred, truth)
    got = [
        (int(c.tp[k]), int(c.tn[k]), int(c.fp[k]), int(c.fn[k]),
         ev.accuracy(c, k), ev.precision(c, k), ev.recall(c, k), ev.specificity(c, k))
        for k in range(4)
    ]
    exact = got == _brute_force(pred.tolist(), truth.tolist())
    scores = np.round(rng.random(200), 3)
    labels = rng.random(200) < 0.5
    auc_err = abs(ev.roc_auc(scores, labels).auc - _pairwise_auc(scores, labels))
    ok = exact and auc_err <= 1e-12
    record(5, "metric oracles", ok, f"confusion exact={exact}, AUC error {auc_err:.1e}")
    assert exact
    assert auc_err <= 1e-12


@pytest.fixture(scope="module")
def experiment():
    t0 = time.perf_counter()
    cfg = ExperimentConfig()
    results = run_experiment(cfg)
    return cfg, results, time.perf_counter() - t0


@pytest.mark.slow
def test_criterion_6_desk_scale_experiment(experiment):
    cfg, results, elapsed = experiment
    assert 4 * cfg.events_per_class >= 160 and cfg.profile == "2.5ghz" and cfg.n_features == 128
    parts, ok = [], True
    for name, res in results.items():
        assert res.model.config.epochs <= 800
        prec = ev.precision(res.counts, A)
        auc = res.rocs[A].auc
        good = res.accuracy >= 0.90 and prec is not ev.UNDEFINED and prec >= 0.90 and auc >= 0.90
        ok &= good
        parts.append(f"{name} acc {res.accuracy:.4f} prec {ev.format_metric(prec)} auc {auc:.4f}")
    record(6, "desk-scale experiment", ok, "; ".join(parts) + f"; {elapsed:.0f} s")
    assert ok


@pytest.mark.slow
def test_criterion_7_alert_lead_time(experiment):
    _, results, _ = experiment
    parts, ok = [], True
    for name, res in results.items():
        s = res.alerts
        good = s.mean is not ev.UNDEFINED and s.mean > 0.6
        ok &= good
        parts.append(
            f"{name} mean {ev.format_metric(s.mean)} s std {ev.format_metric(s.std)} s "
            f"max {ev.format_metric(s.max)} s, {s.misses} missed"
        )
    record(7, "alert lead time", ok, "; ".join(parts))
    assert ok


def _pipeline(root: Path) -> dict[str, bytes]:
    def run(*argv):
        assert main([str(a) for a in argv]) == 0, argv

    run("make-scenarios", "--per-class", "3", "--seed", "8", "--radio-profile", "760mhz", "--out", root / "scen")
    run("synth", *sorted((root / "scen").iterdir()), "--seed", "8", "--out", root / "raw")
    run("preprocess", "--in", root / "raw", "--crop=-600:600", "--out", root / "clean")
    for model in ("lstm", "cnn"):
        run("train", "--in", root / "clean", "--model", model, "--epochs", "5", "--hidden", "8",
            "--learning-rate", "0.05", "--momentum", "0.9", "--batch-size", "16", "--seed", "8",
            "--out", root / f"{model}.model")
        run("eval", "--model", root / f"{model}.model", "--in", root / "clean",
            "--report", root / f"{model}_pred.csv")
        run("report", "--eval", root / f"{model}_pred.csv", "--leads", "--out", root / f"{model}_report")
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_criterion_8_determinism(tmp_path, capsys):
    first = _pipeline(tmp_path / "a")
    second = _pipeline(tmp_path / "b")
    capsys.readouterr()
    same_names = first.keys() == second.keys()
    differing = [k for k in first if first[k] != second.get(k)]
    models = [k for k in first if k.endswith(".model")]
    reports = [k for k in first if "_report/" in k]
    ok = same_names and not differing and len(models) == 2 and reports
    record(8, "CLI determinism", ok, f"{len(first)} files compared, {len(differing)} differ")
    assert ok, differing
