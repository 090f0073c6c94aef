"""One-vs-rest confusion metrics, ROC/AUC and alert lead times."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DomainError
from .scenario import EventClass


class _Undefined:
    """Marker for a metric whose denominator is zero.

    Arithmetic and ordering raise instead of silently producing a number.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNDEFINED"

    def __str__(self):
        return "undefined"

    def __bool__(self):
        raise TypeError("an undefined metric has no truth value")

    def __float__(self):
        raise TypeError("an undefined metric cannot be converted to float")


UNDEFINED = _Undefined()
Metric = Union[float, _Undefined]


@dataclass(frozen=True)
class ConfusionCounts:
    tp: np.ndarray
    tn: np.ndarray
    fp: np.ndarray
    fn: np.ndarray

    @property
    def n_classes(self) -> int:
        return len(self.tp)

    @property
    def total(self) -> int:
        return int(self.tp[0] + self.tn[0] + self.fp[0] + self.fn[0]) if len(self.tp) else 0


def confusion(predictions, truths, n_classes: int = 4) -> ConfusionCounts:
    pred = np.asarray(predictions, dtype=int)
    true = np.asarray(truths, dtype=int)
    if pred.shape != true.shape:
        raise DomainError(f"{pred.size} predictions for {true.size} truths")
    if pred.size and (min(pred.min(), true.min()) < 0 or max(pred.max(), true.max()) >= n_classes):
        raise DomainError(f"labels must lie in 0..{n_classes - 1}")
    classes = np.arange(n_classes)[:, None]
    p, t = pred[None, :] == classes, true[None, :] == classes
    return ConfusionCounts(
        tp=(p & t).sum(axis=1),
        tn=(~p & ~t).sum(axis=1),
        fp=(p & ~t).sum(axis=1),
        fn=(~p & t).sum(axis=1),
    )


def _ratio(num, den) -> Metric:
    return UNDEFINED if den == 0 else float(num) / float(den)


def accuracy(counts: ConfusionCounts, cls: int) -> Metric:
    tp, tn, fp, fn = counts.tp[cls], counts.tn[cls], counts.fp[cls], counts.fn[cls]
    return _ratio(tp + tn, tp + fp + fn + tn)


def precision(counts: ConfusionCounts, cls: int) -> Metric:
    return _ratio(counts.tp[cls], counts.tp[cls] + counts.fp[cls])


def recall(counts: ConfusionCounts, cls: int) -> Metric:
    return _ratio(counts.tp[cls], counts.tp[cls] + counts.fn[cls])


def specificity(counts: ConfusionCounts, cls: int) -> Metric:
    return _ratio(counts.tn[cls], counts.tn[cls] + counts.fp[cls])


def overall_accuracy(counts: ConfusionCounts) -> Metric:
    """Fraction of samples classified correctly (micro-averaged precision)."""
    return _ratio(counts.tp.sum(), counts.total)


METRICS = {
    "accuracy": accuracy,
    "precision": precision,
    "recall": recall,
    "specificity": specificity,
}


@dataclass(frozen=True)
class RocCurve:
    thresholds: np.ndarray  # descending; the first is +inf (nothing flagged)
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def roc_auc(scores, truths) -> RocCurve:
    """ROC by sweeping every distinct score as a threshold; trapezoidal AUC."""
    s = np.asarray(scores, dtype=float)
    t = np.asarray(truths).astype(bool)
    if s.shape != t.shape:
        raise DomainError("scores and truths must have equal length")
    n_pos, n_neg = int(t.sum()), int((~t).sum())
    if n_pos == 0 or n_neg == 0:
        raise DomainError("ROC needs at least one positive and one negative sample")
    order = np.argsort(-s, kind="mergesort")
    s_sorted, t_sorted = s[order], t[order]
    # last index of each run of equal scores
    ends = np.flatnonzero(np.r_[s_sorted[1:] != s_sorted[:-1], True])
    tp = np.cumsum(t_sorted)[ends]
    fp = np.cumsum(~t_sorted)[ends]
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    thresholds = np.r_[np.inf, s_sorted[ends]]
    auc = float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(thresholds, fpr, tpr, auc)


def roc_per_class(probabilities, truths, n_classes: int = 4) -> dict[int, Optional[RocCurve]]:
    """One-vs-rest curves; ``None`` where a class has no positives or no negatives."""
    probs = np.asarray(probabilities, dtype=float)
    true = np.asarray(truths, dtype=int)
    out = {}
    for k in range(n_classes):
        pos = true == k
        out[k] = roc_auc(probs[:, k], pos) if 0 < pos.sum() < pos.size else None
    return out


# alert lead time ----------------------------------------------------------


@dataclass(frozen=True)
class EventPrediction:
    """Predictions over one recorded event, in time order."""

    timestamps: np.ndarray
    predicted: np.ndarray
    truth: np.ndarray
    intersection_time: Optional[float]
    event_id: str = ""


@dataclass(frozen=True)
class AlertStats:
    lead_times: tuple[float, ...]
    misses: int
    mean: Metric
    std: Metric
    max: Metric


def _approach_span(truth: np.ndarray) -> Optional[tuple[int, int]]:
    idx = np.flatnonzero(truth == EventClass.VEHICLE_APPROACHING)
    if idx.size == 0:
        return None
    start = end = idx[0]
    while end + 1 < truth.size and truth[end + 1] == EventClass.VEHICLE_APPROACHING:
        end += 1
    return int(start), int(end)


def event_lead_time(event: EventPrediction) -> Optional[float]:
    """Lead of the first approach prediction inside the first ground-truth approach run."""
    if event.intersection_time is None:
        raise DomainError(f"event {event.event_id!r} has no intersection time")
    truth = np.asarray(event.truth, dtype=int)
    pred = np.asarray(event.predicted, dtype=int)
    span = _approach_span(truth)
    if span is None:
        return None
    start, end = span
    hits = np.flatnonzero(pred[start : end + 1] == EventClass.VEHICLE_APPROACHING)
    if hits.size == 0:
        return None
    return float(event.intersection_time - event.timestamps[start + hits[0]])


def alert_lead_times(events: Sequence[EventPrediction]) -> AlertStats:
    """Lead times of detected events; undetected events count as misses.

    ``std`` is the population standard deviation of the lead times.
    """
    leads, misses = [], 0
    for ev in events:
        lead = event_lead_time(ev)
        if lead is None:
            misses += 1
        else:
            leads.append(lead)
    if not leads:
        return AlertStats((), misses, UNDEFINED, UNDEFINED, UNDEFINED)
    arr = np.array(leads)
    return AlertStats(tuple(leads), misses, float(arr.mean()), float(arr.std()), float(arr.max()))


# report files -------------------------------------------------------------


def format_metric(value: Metric) -> str:
    return "undefined" if value is UNDEFINED else f"{value:.4f}"


def metrics_rows(counts: ConfusionCounts, rocs: dict) -> list[tuple[str, str, str]]:
    rows = []
    for k in range(counts.n_classes):
        name = EventClass(k).wire_name
        for metric, fn in METRICS.items():
            rows.append((name, metric, format_metric(fn(counts, k))))
        roc = rocs.get(k)
        rows.append((name, "auc", format_metric(UNDEFINED if roc is None else roc.auc)))
    return rows


def write_metrics_table(path, counts: ConfusionCounts, rocs: dict) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["class", "metric", "value"])
        w.writerows(metrics_rows(counts, rocs))


def write_roc_csv(path, roc: RocCurve) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold", "fpr", "tpr"])
        for thr, x, y in zip(roc.thresholds, roc.fpr, roc.tpr):
            w.writerow(["inf" if math.isinf(thr) else f"{thr:.4f}", f"{x:.4f}", f"{y:.4f}"])


def write_alert_stats(path, stats: AlertStats) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["statistic", "value"])
        w.writerow(["events_detected", len(stats.lead_times)])
        w.writerow(["misses", stats.misses])
        for key in ("mean", "std", "max"):
            w.writerow([f"{key}_lead_s", format_metric(getattr(stats, key))])
