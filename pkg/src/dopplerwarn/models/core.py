"""Training, inference, gradient checking and model files."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from ..dataset import SplitDataset
from ..errors import ConfigError, DomainError, FormatError, TrainingError
from .cnn import CnnConfig, CnnNetwork
from .lstm import LstmConfig, LstmNetwork
from .params import Registry, flatten, init_params, param_count, softmax, unflatten

ModelConfig = Union[LstmConfig, CnnConfig]


def network_for(config: ModelConfig):
    if isinstance(config, LstmConfig):
        return LstmNetwork(config)
    if isinstance(config, CnnConfig):
        return CnnNetwork(config)
    raise ConfigError(f"unsupported model config {type(config).__name__}")


@dataclass(frozen=True)
class TrainedModel:
    kind: str
    config: ModelConfig
    parameters: np.ndarray
    training_history: tuple[tuple[float, float], ...] = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        reg = self.registry
        if self.parameters.size != param_count(reg):
            raise ConfigError(
                f"{self.parameters.size} parameters, shape registry expects {param_count(reg)}"
            )

    @property
    def registry(self) -> Registry:
        return network_for(self.config).registry()

    def named(self) -> dict[str, np.ndarray]:
        return unflatten(self.parameters, self.registry)


def initial_model(config: ModelConfig) -> TrainedModel:
    net = network_for(config)
    params = init_params(net.registry(), np.random.default_rng(config.seed))
    return TrainedModel(config.kind, config, params)


def _as_batch(config: ModelConfig, X) -> tuple[np.ndarray, bool]:
    X = np.asarray(X, dtype=float)
    single = X.ndim == 2
    if single:
        X = X[None]
    expected = (config.time_step, config.n_features)
    if X.ndim != 3 or X.shape[1:] != expected:
        raise DomainError(
            f"window shape {X.shape[-2:] if X.ndim >= 2 else X.shape} does not match "
            f"(time_step, n_features) = {expected}"
        )
    return X, single


def forward(model: TrainedModel, X) -> np.ndarray:
    """Class probabilities for one window ``(T, F)`` or a batch ``(N, T, F)``."""
    Xb, single = _as_batch(model.config, X)
    logits, _ = network_for(model.config).forward(model.named(), Xb)
    probs = softmax(logits)
    return probs[0] if single else probs


def lstm_forward(model: TrainedModel, window) -> np.ndarray:
    if model.kind != "lstm":
        raise DomainError(f"expected an lstm model, got {model.kind}")
    return forward(model, window)


def cnn_forward(model: TrainedModel, window) -> np.ndarray:
    if model.kind != "cnn":
        raise DomainError(f"expected a cnn model, got {model.kind}")
    return forward(model, window)


def predict(model: TrainedModel, window) -> tuple:
    """``(class, probabilities)``; ties go to the lowest class index."""
    probs = forward(model, window)
    return np.argmax(probs, axis=-1), probs


def _cross_entropy(logits: np.ndarray, y: np.ndarray) -> float:
    with np.errstate(invalid="ignore", over="ignore"):
        z = logits - logits.max(axis=1, keepdims=True)
        logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return float(-np.mean(logp[np.arange(logits.shape[0]), y]))


def loss_and_grad(config: ModelConfig, flat: np.ndarray, X: np.ndarray, y: np.ndarray):
    """Mean cross-entropy, its gradient (flat) and the batch probabilities."""
    net = network_for(config)
    reg = net.registry()
    p = unflatten(flat, reg)
    logits, cache = net.forward(p, X)
    probs = softmax(logits)
    n = X.shape[0]
    loss = _cross_entropy(logits, y)
    dlogits = probs.copy()
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    grads = net.backward(p, cache, dlogits)
    return loss, flatten(grads, reg), probs


def loss_only(config: ModelConfig, flat: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
    net = network_for(config)
    logits, _ = net.forward(unflatten(flat, net.registry()), X)
    return _cross_entropy(logits, y)


def train(config: ModelConfig, split: SplitDataset, init: TrainedModel | None = None) -> TrainedModel:
    """Gradient descent (optional momentum) on mean cross-entropy.

    Full batch unless ``config.batch_size`` is set.  The history records the
    loss and accuracy of the training set as seen by each epoch's updates.
    """
    X, y = split.arrays("train")
    if X.shape[0] == 0:
        raise DomainError("training split is empty")
    X, _ = _as_batch(config, X)
    if y.min() < 0 or y.max() >= config.n_classes:
        raise DomainError(f"labels must lie in 0..{config.n_classes - 1}")
    model = init if init is not None else initial_model(config)
    flat = model.parameters.copy()
    rng = np.random.default_rng([config.seed, 1])
    velocity = np.zeros_like(flat)
    n = X.shape[0]
    batch = n if config.batch_size is None else max(1, min(config.batch_size, n))
    history = []
    for epoch in range(1, config.epochs + 1):
        order = np.arange(n) if batch == n else rng.permutation(n)
        losses, correct = [], 0
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            loss, grad, probs = loss_and_grad(config, flat, X[idx], y[idx])
            if not math.isfinite(loss) or not np.all(np.isfinite(grad)):
                raise TrainingError(epoch, loss)
            losses.append(loss * len(idx))
            correct += int(np.sum(np.argmax(probs, axis=1) == y[idx]))
            velocity = config.momentum * velocity - config.learning_rate * grad
            flat = flat + velocity
        history.append((sum(losses) / n, correct / n))
    meta = dict(model.meta)
    meta.update(normalization=split.normalization, split_seed=split.split_seed)
    return TrainedModel(config.kind, config, flat, tuple(history), meta)


def gradient_check(config: ModelConfig, sample, step: float = 1e-5, params: np.ndarray | None = None) -> float:
    """Max relative error between backprop and central finite differences.

    The relative error of one parameter is ``|a - n| / max(|a|, |n|, 1e-6)``;
    the floor keeps gradients that are zero up to round-off from dominating.
    """
    X, y = sample
    X, single = _as_batch(config, X)
    y = np.atleast_1d(np.asarray(y, dtype=int))
    net = network_for(config)
    reg = net.registry()
    if params is None:
        rng = np.random.default_rng([config.seed, 7])
        params = init_params(reg, rng) + 0.1 * rng.standard_normal(param_count(reg))
    if params.size > 500:
        raise DomainError(f"gradient_check is meant for tiny models, got {params.size} parameters")
    _, analytic, _ = loss_and_grad(config, params, X, y)
    worst = 0.0
    probe = params.copy()
    for k in range(params.size):
        orig = probe[k]
        probe[k] = orig + step
        up = loss_only(config, probe, X, y)
        probe[k] = orig - step
        down = loss_only(config, probe, X, y)
        probe[k] = orig
        numeric = (up - down) / (2 * step)
        denom = max(abs(analytic[k]), abs(numeric), 1e-6)
        worst = max(worst, abs(analytic[k] - numeric) / denom)
    return worst


# model files ---------------------------------------------------------------

_INT_FIELDS = {"layers", "hidden_nodes", "time_step", "n_features", "n_classes", "epochs", "seed",
               "conv_layers", "kernel_size", "stride", "pool_size"}


def _fmt_param(x: float) -> str:
    return f"{x:.8e}"


def save_model(path, model: TrainedModel) -> None:
    """Text header (kind, config, metadata), then parameters and history."""
    lines = ["version=1", f"kind={model.kind}"]
    for f in dataclasses.fields(model.config):
        value = getattr(model.config, f.name)
        if f.name == "filters":
            value = ",".join(str(v) for v in value)
        elif value is None:
            value = "none"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"config.{f.name}={value}")
    for key in sorted(model.meta):
        value = model.meta[key]
        if isinstance(value, (tuple, list)):
            value = ",".join(_fmt_param(float(v)) if isinstance(v, float) else str(v) for v in value)
        elif isinstance(value, float):
            value = _fmt_param(value)
        lines.append(f"meta.{key}={value}")
    lines.append(f"n_parameters={model.parameters.size}")
    lines.append("[parameters]")
    lines.extend(_fmt_param(v) for v in model.parameters)
    lines.append("[history]")
    lines.extend(f"{i + 1},{_fmt_param(loss)},{_fmt_param(acc)}" for i, (loss, acc) in enumerate(model.training_history))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_config_value(name: str, raw: str):
    if name == "filters":
        return tuple(int(v) for v in raw.split(",") if v)
    if raw == "none":
        return None
    if name in _INT_FIELDS or name == "batch_size":
        return int(raw)
    return float(raw)


def _parse_meta_value(key: str, raw: str):
    if key == "normalization":
        lo, hi = raw.split(",")
        return (float(lo), float(hi))
    for kind in (int, float):
        try:
            return kind(raw)
        except ValueError:
            pass
    return raw


def load_model(path) -> TrainedModel:
    kind, config_kw, meta = None, {}, {}
    params, history = [], []
    section, n_params = "header", None
    with open(path, encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line in ("[parameters]", "[history]"):
                section = line[1:-1]
                continue
            try:
                if section == "header":
                    key, sep, value = line.partition("=")
                    if not sep:
                        raise ValueError(f"expected key=value, got {line!r}")
                    if key == "kind":
                        kind = value
                    elif key.startswith("config."):
                        name = key[len("config."):]
                        config_kw[name] = _parse_config_value(name, value)
                    elif key.startswith("meta."):
                        name = key[len("meta."):]
                        meta[name] = _parse_meta_value(name, value)
                    elif key == "n_parameters":
                        n_params = int(value)
                    elif key != "version":
                        raise ValueError(f"unknown header key {key!r}")
                elif section == "parameters":
                    params.append(float(line))
                else:
                    _, loss, acc = line.split(",")
                    history.append((float(loss), float(acc)))
            except ValueError as exc:
                raise FormatError(str(exc), path, lineno) from None
    if kind not in ("lstm", "cnn"):
        raise FormatError(f"unknown model kind {kind!r}", path)
    cls = LstmConfig if kind == "lstm" else CnnConfig
    try:
        config = cls(**config_kw)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"bad model config: {exc}", path) from None
    if n_params is not None and n_params != len(params):
        raise FormatError(f"header announces {n_params} parameters, found {len(params)}", path)
    try:
        return TrainedModel(kind, config, np.array(params, dtype=float), tuple(history), meta)
    except ConfigError as exc:
        raise FormatError(str(exc), path) from None
