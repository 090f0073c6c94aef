"""Desk-scale end-to-end experiment on synthetic events.

synthesize -> sanitize -> window/pool -> 80/20 split -> train -> evaluate,
plus alert lead times on a separate batch of pass-by events.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import evaluate as ev
from .dataset import LabeledWindow, normalize, split, window
from .models import CnnConfig, LstmConfig, ModelConfig, TrainedModel, forward, train
from .preprocess import sanitize
from .scenario import EventClass, ScenarioConfig, intersection_time, random_scenario
from .synth import PROFILES, Spectrogram, synth_spectrogram

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Event:
    event_id: str
    scenario: ScenarioConfig
    spectrogram: Spectrogram
    labels: list


@dataclass(frozen=True)
class ExperimentConfig:
    profile: str = "2.5ghz"
    events_per_class: int = 40
    duration: float = 12.0
    n_features: int = 128
    split_fraction: float = 0.80
    seed: int = 2023
    lead_events: int = 20
    # mini-batch momentum descent; full-batch descent needs thousands of epochs here
    lstm: LstmConfig = LstmConfig(
        hidden_nodes=32, n_features=128, epochs=60, learning_rate=0.1, momentum=0.9, batch_size=64, seed=1
    )
    # six sweeps so 2x2 pooling keeps the most recent one
    cnn: CnnConfig = CnnConfig(
        filters=(8, 16), time_step=6, n_features=128, epochs=30, learning_rate=0.02, momentum=0.9,
        batch_size=32, seed=2,
    )


@dataclass
class ModelResult:
    model: TrainedModel
    counts: ev.ConfusionCounts
    rocs: dict
    accuracy: float
    alerts: ev.AlertStats
    test_truth: np.ndarray = field(repr=False)
    test_probs: np.ndarray = field(repr=False)


def generate_events(
    profile: str,
    classes: list[EventClass],
    seed: int,
    duration: float = 12.0,
    prefix: str = "ev",
) -> list[Event]:
    radio = PROFILES[profile]
    rng = np.random.default_rng(seed)
    events = []
    for i, cls in enumerate(classes):
        scen = random_scenario(cls, rng, carrier_frequency=radio.center_frequency, duration=duration)
        spec, labels = synth_spectrogram(scen, radio, rng_seed=int(rng.integers(2**31)))
        spec = sanitize(spec)
        spec.meta["event_class"] = cls.wire_name
        t_meet = intersection_time(scen)
        if t_meet is not None:
            spec.meta["intersection_time_s"] = t_meet
        events.append(Event(f"{prefix}{i:04d}", scen, spec, labels))
    return events


def balanced_classes(per_class: int) -> list[EventClass]:
    return [cls for cls in EventClass for _ in range(per_class)]


def event_windows(events, time_step: int, n_features: int) -> list[LabeledWindow]:
    out = []
    for e in events:
        out.extend(window(e.spectrogram, e.labels, time_step, e.event_id, n_features))
    return out


def predict_events(model: TrainedModel, events, n_features: int) -> list[ev.EventPrediction]:
    norm = model.meta["normalization"]
    preds = []
    for e in events:
        wins = window(e.spectrogram, e.labels, model.config.time_step, e.event_id, n_features)
        if not wins:
            continue
        X = np.stack([normalize(w.features, norm) for w in wins])
        probs = forward(model, X)
        preds.append(
            ev.EventPrediction(
                timestamps=np.array([w.timestamp for w in wins]),
                predicted=np.argmax(probs, axis=1),
                truth=np.array([int(w.label) for w in wins]),
                intersection_time=e.spectrogram.meta.get("intersection_time_s"),
                event_id=e.event_id,
            )
        )
    return preds


def evaluate_model(model: TrainedModel, X: np.ndarray, y: np.ndarray):
    probs = forward(model, X)
    pred = np.argmax(probs, axis=1)
    counts = ev.confusion(pred, y, model.config.n_classes)
    return counts, ev.roc_per_class(probs, y, model.config.n_classes), probs


def run_model(
    config: ModelConfig,
    events: list[Event],
    lead_events: list[Event],
    n_features: int,
    fraction: float,
    split_seed: int,
) -> ModelResult:
    config = dataclasses.replace(config, n_features=n_features)
    data = split(event_windows(events, config.time_step, n_features), fraction, split_seed)
    log.info("%s: %d train / %d test windows", config.kind, len(data.train), len(data.test))
    model = train(config, data)
    X, y = data.arrays("test")
    counts, rocs, probs = evaluate_model(model, X, y)
    alerts = ev.alert_lead_times(predict_events(model, lead_events, n_features))
    return ModelResult(model, counts, rocs, ev.overall_accuracy(counts), alerts, y, probs)


def run_experiment(cfg: ExperimentConfig = ExperimentConfig(), models=("lstm", "cnn")) -> dict[str, ModelResult]:
    events = generate_events(cfg.profile, balanced_classes(cfg.events_per_class), cfg.seed, cfg.duration)
    lead = generate_events(
        cfg.profile,
        [EventClass.VEHICLE_APPROACHING] * cfg.lead_events,
        cfg.seed + 1,
        cfg.duration,
        prefix="lead",
    )
    out = {}
    for name in models:
        config: Optional[ModelConfig] = {"lstm": cfg.lstm, "cnn": cfg.cnn}[name]
        out[name] = run_model(config, events, lead, cfg.n_features, cfg.split_fraction, cfg.seed)
    return out
