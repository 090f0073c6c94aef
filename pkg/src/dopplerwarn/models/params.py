"""Flat parameter vectors with a named shape registry."""

from __future__ import annotations

import math

import numpy as np

Registry = list[tuple[str, tuple[int, ...]]]


def param_count(registry: Registry) -> int:
    return sum(math.prod(shape) for _, shape in registry)


def unflatten(flat: np.ndarray, registry: Registry) -> dict[str, np.ndarray]:
    """Named views into ``flat``; writing through a view updates the vector."""
    if flat.size != param_count(registry):
        raise ValueError(f"parameter vector has {flat.size} entries, registry needs {param_count(registry)}")
    out, pos = {}, 0
    for name, shape in registry:
        size = math.prod(shape)
        out[name] = flat[pos : pos + size].reshape(shape)
        pos += size
    return out


def flatten(arrays: dict[str, np.ndarray], registry: Registry) -> np.ndarray:
    return np.concatenate([np.asarray(arrays[name], dtype=float).ravel() for name, _ in registry])


def _fans(shape: tuple[int, ...]) -> tuple[int, int]:
    if len(shape) == 2:
        return shape[0], shape[1]
    # conv kernel (out, in, kh, kw)
    receptive = math.prod(shape[2:])
    return shape[1] * receptive, shape[0] * receptive


def init_params(registry: Registry, rng: np.random.Generator) -> np.ndarray:
    """Uniform ±sqrt(6 / (fan_in + fan_out)) weights, zero biases."""
    parts = []
    for name, shape in registry:
        if name.endswith(".b"):
            parts.append(np.zeros(math.prod(shape)))
            continue
        fan_in, fan_out = _fans(shape)
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        parts.append(rng.uniform(-limit, limit, size=math.prod(shape)))
    return np.concatenate(parts) if parts else np.zeros(0)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))
