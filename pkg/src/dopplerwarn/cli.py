"""Command-line pipeline: make-scenarios, synth, preprocess, train, eval, report.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import evaluate as ev
from .dataset import normalize, read_spectrogram, split, window, write_spectrogram
from .errors import ConfigError, DomainError, FormatError, TrainingError
from .models import CnnConfig, LstmConfig, forward, load_model, save_model, train
from .preprocess import sanitize
from .scenario import EventClass, ScenarioConfig, Trajectory, intersection_time, random_scenario
from .synth import PROFILES, snapshot_seed, synth_spectrogram

log = logging.getLogger("dopplerwarn")

SPECTROGRAM_SUFFIX = ".spectrogram.csv"
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


# scenario files ------------------------------------------------------------

_VEHICLES = ("tx", "rx", "oncoming")


def _fmt_accel(accel) -> str:
    return ";".join(f"{t!r}:{a!r}" for t, a in accel)


def _parse_accel(raw: str):
    pts = []
    for item in filter(None, (s.strip() for s in raw.split(";"))):
        t, _, a = item.partition(":")
        pts.append((float(t), float(a)))
    return tuple(pts)


def write_scenario_file(path, scenario: ScenarioConfig) -> None:
    lines = [
        f"event_class={scenario.event_class.wire_name}",
        f"duration_s={scenario.duration!r}",
        f"snapshot_period_s={scenario.snapshot_period!r}",
        f"carrier_frequency_hz={scenario.carrier_frequency!r}",
    ]
    for name in _VEHICLES:
        traj = getattr(scenario, name)
        if traj is None:
            continue
        lines += [
            f"{name}_position_m={traj.position!r}",
            f"{name}_speed_mps={traj.speed!r}",
            f"{name}_lane_m={traj.lane!r}",
        ]
        if traj.accel:
            lines.append(f"{name}_accel={_fmt_accel(traj.accel)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_scenario_file(path, default_carrier: float | None = None) -> ScenarioConfig:
    """Parse a ``key=value`` scenario file; ``#`` starts a comment."""
    kv = {}
    with open(path, encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise FormatError(f"expected key=value, got {line!r}", path, lineno)
            kv[key.strip()] = (value.strip(), lineno)

    def get(key, kind=float, default=None):
        if key not in kv:
            if default is None:
                raise FormatError(f"missing key {key!r}", path)
            return default
        value, lineno = kv.pop(key)
        try:
            return kind(value)
        except ValueError as exc:
            raise FormatError(f"bad value for {key}: {exc}", path, lineno) from None

    def vehicle(name, required):
        if not required and f"{name}_position_m" not in kv:
            return None
        return Trajectory(
            position=get(f"{name}_position_m"),
            speed=get(f"{name}_speed_mps"),
            lane=get(f"{name}_lane_m", default=3.5 if name == "oncoming" else 0.0),
            accel=get(f"{name}_accel", _parse_accel, default=()),
        )

    try:
        event = get("event_class", EventClass.from_wire)
        scenario = ScenarioConfig(
            tx=vehicle("tx", True),
            rx=vehicle("rx", True),
            oncoming=vehicle("oncoming", False),
            carrier_frequency=get("carrier_frequency_hz", default=default_carrier or 760e6),
            duration=get("duration_s"),
            snapshot_period=get("snapshot_period_s", default=0.40),
            event_class=event,
        )
    except DomainError as exc:
        raise FormatError(f"invalid scenario: {exc}", path) from None
    if kv:
        key, (_, lineno) = next(iter(kv.items()))
        raise FormatError(f"unknown key {key!r}", path, lineno)
    return scenario


# helpers ---------------------------------------------------------------------


def _spectrogram_files(directory) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"input directory not found: {directory}")
    return sorted(p for p in d.iterdir() if p.name.endswith(SPECTROGRAM_SUFFIX))


def _stem(path: Path) -> str:
    return path.name[: -len(SPECTROGRAM_SUFFIX)]


def _parse_crop(raw: str) -> tuple[float, float]:
    lo, sep, hi = raw.partition(":")
    try:
        if not sep:
            raise ValueError
        return float(lo), float(hi)
    except ValueError:
        raise UsageError(f"--crop expects lo:hi in Hz, got {raw!r}") from None


def _load_windows(directory, time_step: int, n_features: int):
    files = _spectrogram_files(directory)
    windows, meta, n_points = [], {}, None
    for f in files:
        spec, labels = read_spectrogram(f)
        if n_points is None:
            n_points = spec.radio.n_points
        elif spec.radio.n_points != n_points:
            raise DomainError(f"{f.name}: {spec.radio.n_points} bins, other files have {n_points}")
        windows.extend(window(spec, labels, time_step, _stem(f), n_features))
        meta[_stem(f)] = spec.meta
    return windows, meta, n_points


# subcommands ---------------------------------------------------------------


def cmd_make_scenarios(args) -> int:
    radio = PROFILES[args.radio_profile]
    rng = np.random.default_rng(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for cls in EventClass:
        for i in range(args.per_class):
            scen = random_scenario(cls, rng, radio.center_frequency, args.duration)
            path = out / f"{cls.wire_name}_{i:03d}.scenario"
            write_scenario_file(path, scen)
            print(path)
    return EXIT_OK


def _radio_from_args(args):
    radio = PROFILES[args.radio_profile]
    overrides = {
        "center_frequency": args.center_frequency,
        "span": args.span,
        "n_points": args.n_points,
        "sweep_time": args.sweep_time,
        "noise_floor": args.noise_floor,
        "drift_rate": args.drift_rate,
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return dataclasses.replace(radio, **overrides) if overrides else radio


def cmd_synth(args) -> int:
    radio = _radio_from_args(args)
    rows = []
    if args.scenarios:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
    for i, path in enumerate(args.scenarios):
        scen = read_scenario_file(path, default_carrier=radio.center_frequency)
        spec, labels = synth_spectrogram(scen, radio, snapshot_seed(args.seed, i))
        spec.meta["event_class"] = scen.event_class.wire_name
        t_meet = intersection_time(scen)
        if t_meet is not None:
            spec.meta["intersection_time_s"] = t_meet
        target = out / (Path(path).stem + SPECTROGRAM_SUFFIX)
        write_spectrogram(target, spec, labels)
        rows.append((target.name, scen.event_class.wire_name, len(spec)))
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["file", "class", "snapshots"])
    w.writerows(rows)
    if rows:
        with open(out / "manifest.csv", "w", newline="") as fh:
            mw = csv.writer(fh, lineterminator="\n")
            mw.writerow(["file", "class", "snapshots"])
            mw.writerows(rows)
    return EXIT_OK


def cmd_preprocess(args) -> int:
    crop = _parse_crop(args.crop) if args.crop else None
    files = _spectrogram_files(args.in_dir)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for f in files:
        spec, labels = read_spectrogram(f)
        clean = sanitize(spec, crop=crop, threshold_offset_db=args.threshold_offset, search_bins=args.search_bins)
        flagged = clean.meta.pop("drift_flagged", None)
        if flagged:
            log.warning("%s: %d snapshots without a dominant LOS left unshifted", f.name, len(flagged))
        write_spectrogram(out / f.name, clean, labels)
        print(f"{f.name},{clean.radio.n_points}")
    return EXIT_OK


def cmd_train(args) -> int:
    if args.model == "lstm":
        config = LstmConfig(
            layers=args.layers,
            hidden_nodes=args.hidden,
            time_step=args.time_step,
            n_features=args.features,
            epochs=args.epochs,
            learning_rate=args.learning_rate,
            momentum=args.momentum,
            batch_size=args.batch_size,
            seed=args.seed,
        )
    else:
        filters = tuple(int(v) for v in args.filters.split(","))
        config = CnnConfig(
            conv_layers=len(filters),
            filters=filters,
            time_step=args.time_step,
            n_features=args.features,
            epochs=args.epochs,
            learning_rate=args.learning_rate,
            momentum=args.momentum,
            batch_size=args.batch_size,
            seed=args.seed,
        )
    windows, _, n_points = _load_windows(args.in_dir, config.time_step, config.n_features)
    data = split(windows, args.split_fraction, args.seed)
    model = train(config, data)
    model.meta.update(input_bins=n_points, split_fraction=args.split_fraction)
    save_model(args.out, model)
    loss, acc = model.training_history[-1]
    print(f"{args.model}: {len(data.train)} train windows, final loss {loss:.4f}, train accuracy {acc:.4f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    model = load_model(args.model)
    cfg = model.config
    expected_bins = model.meta.get("input_bins")
    windows, meta, n_points = _load_windows(args.in_dir, cfg.time_step, cfg.n_features)
    if expected_bins is not None and n_points is not None and n_points != expected_bins:
        raise DomainError(f"feature count mismatch: model expects {expected_bins} bins, found {n_points}")
    if args.subset == "test":
        data = split(windows, model.meta.get("split_fraction", 0.8), model.meta.get("split_seed", 0))
        keep = {w.origin for w in data.test}
        windows = [w for w in windows if w.origin in keep]
    norm = model.meta.get("normalization", (0.0, 1.0))
    rows = []
    if windows:
        probs = forward(model, np.stack([normalize(w.features, norm) for w in windows]))
        for w, p in zip(windows, probs):
            t_meet = meta[w.origin[0]].get("intersection_time_s")
            rows.append(
                [w.origin[0], w.origin[1], f"{w.timestamp:.6f}", EventClass(w.label).wire_name,
                 EventClass(int(np.argmax(p))).wire_name, *(f"{v:.6f}" for v in p),
                 "" if t_meet is None else f"{t_meet:.6f}"]
            )
    with open(args.report, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["event", "start", "timestamp", "truth", "predicted",
                    *(f"p_{c.wire_name}" for c in EventClass), "intersection_time_s"])
        w.writerows(rows)
    print(f"{len(rows)} windows evaluated -> {args.report}")
    return EXIT_OK


def _read_predictions(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if rows and "predicted" not in rows[0]:
        raise FormatError("not a predictions file (missing 'predicted' column)", path)
    return rows


def cmd_report(args) -> int:
    rows = _read_predictions(args.eval)
    if not rows:
        raise DomainError(f"{args.eval} holds no predictions")
    try:
        truth = np.array([EventClass.from_wire(r["truth"]) for r in rows], dtype=int)
        pred = np.array([EventClass.from_wire(r["predicted"]) for r in rows], dtype=int)
        probs = np.array([[float(r[f"p_{c.wire_name}"]) for c in EventClass] for r in rows])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad predictions row: {exc}", args.eval) from None
    out = Path(args.out) if args.out else Path(args.eval).resolve().parent
    out.mkdir(parents=True, exist_ok=True)
    counts = ev.confusion(pred, truth)
    rocs = ev.roc_per_class(probs, truth)
    ev.write_metrics_table(out / "metrics.csv", counts, rocs)
    for k, roc in rocs.items():
        if roc is not None:
            ev.write_roc_csv(out / f"roc_{EventClass(k).wire_name}.csv", roc)
    print("class,metric,value")
    for row in ev.metrics_rows(counts, rocs):
        print(",".join(row))
    print(f"overall,accuracy,{ev.format_metric(ev.overall_accuracy(counts))}")
    if args.leads:
        by_event: dict[str, list] = {}
        for r, t, p in zip(rows, truth, pred):
            by_event.setdefault(r["event"], []).append((float(r["timestamp"]), t, p, r["intersection_time_s"]))
        events = []
        for name in sorted(by_event):
            items = sorted(by_event[name])
            t_meet = items[0][3]
            if not t_meet:
                continue
            events.append(
                ev.EventPrediction(
                    timestamps=np.array([i[0] for i in items]),
                    predicted=np.array([i[2] for i in items]),
                    truth=np.array([i[1] for i in items]),
                    intersection_time=float(t_meet),
                    event_id=name,
                )
            )
        stats = ev.alert_lead_times(events)
        ev.write_alert_stats(out / "alerts.csv", stats)
        print(
            f"alerts: {len(stats.lead_times)} detected, {stats.misses} missed, "
            f"mean {ev.format_metric(stats.mean)} s, std {ev.format_metric(stats.std)} s, "
            f"max {ev.format_metric(stats.max)} s"
        )
    return EXIT_OK


# parser ----------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dopplerwarn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    profiles = sorted(PROFILES)

    p = sub.add_parser("make-scenarios", help="write random scenario files balanced over the four classes")
    p.add_argument("--per-class", type=int, default=10, help="scenarios per event class (default 10)")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--radio-profile", choices=profiles, default="2.5ghz", help="carrier profile")
    p.add_argument("--duration", type=float, default=12.0, help="scenario duration in seconds")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_make_scenarios)

    p = sub.add_parser("synth", help="synthesize spectrogram files from scenario files")
    p.add_argument("scenarios", nargs="*", help="scenario files (key=value text)")
    p.add_argument("--seed", type=int, default=0, help="random seed; per-scenario seeds derive from it")
    p.add_argument("--radio-profile", choices=profiles, default="760mhz", help="analyzer preset")
    p.add_argument("--center-frequency", type=float, help="override carrier/center frequency (Hz)")
    p.add_argument("--span", type=float, help="override frequency span (Hz)")
    p.add_argument("--n-points", type=int, help="override number of sweep points (odd)")
    p.add_argument("--sweep-time", type=float, help="override sweep time (s)")
    p.add_argument("--noise-floor", type=float, help="override noise floor (dBm)")
    p.add_argument("--drift-rate", type=float, help="override instrument drift (Hz/min)")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="drift-correct, denoise and crop spectrogram files")
    p.add_argument("--in", dest="in_dir", required=True, help="directory of spectrogram files")
    p.add_argument("--crop", help="keep lo:hi Hz (write as --crop=-600:600)")
    p.add_argument("--threshold-offset", type=float, default=6.0, help="denoise threshold above floor (dB)")
    p.add_argument("--search-bins", type=int, default=5, help="LOS tracking search half-width (bins)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train an LSTM or CNN classifier")
    p.add_argument("--in", dest="in_dir", required=True, help="directory of preprocessed spectrograms")
    p.add_argument("--model", choices=("lstm", "cnn"), required=True, help="architecture")
    p.add_argument("--time-step", type=int, default=None, help="window length (default 1 lstm, 5 cnn)")
    p.add_argument("--epochs", type=int, default=800, help="training epochs")
    p.add_argument("--seed", type=int, default=0, help="seed for split and initialization")
    p.add_argument("--features", type=int, default=128, help="features per sweep after max-pooling")
    p.add_argument("--layers", type=int, default=2, help="LSTM layers")
    p.add_argument("--hidden", type=int, default=100, help="LSTM hidden nodes")
    p.add_argument("--filters", default="8,16", help="CNN filters per conv layer, comma separated")
    p.add_argument("--learning-rate", type=float, default=0.01, help="gradient-descent step")
    p.add_argument("--momentum", type=float, default=0.0, help="momentum (0 = plain gradient descent)")
    p.add_argument("--batch-size", type=int, default=None, help="mini-batch size (default full batch)")
    p.add_argument("--split-fraction", type=float, default=0.80, help="training fraction")
    p.add_argument("--out", required=True, help="model file to write")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="classify windows and write per-window predictions")
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--in", dest="in_dir", required=True, help="directory of preprocessed spectrograms")
    p.add_argument("--subset", choices=("test", "all"), default="test",
                   help="evaluate the held-out split recorded in the model, or every window")
    p.add_argument("--report", required=True, help="predictions CSV to write")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="metrics table, ROC curves and alert lead times")
    p.add_argument("--eval", required=True, help="predictions CSV from 'eval'")
    p.add_argument("--leads", action="store_true", help="also compute alert lead times")
    p.add_argument("--out", help="output directory (default: next to the predictions file)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "time_step", 0) is None:
        args.time_step = 1 if args.model == "lstm" else 5
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"dopplerwarn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingError as exc:
        print(f"dopplerwarn: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, FormatError, DomainError, ConfigError) as exc:
        print(f"dopplerwarn: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
