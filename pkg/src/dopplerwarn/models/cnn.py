"""Two-dimensional CNN over (time, frequency) windows.

conv (zero padded) + ReLU, repeated per layer, then one max-pooling stage,
flatten, dense, softmax.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import ConfigError
from .params import Registry


@dataclass(frozen=True)
class CnnConfig:
    conv_layers: int = 2
    filters: tuple[int, ...] = (8, 16)
    kernel_size: int = 3
    stride: int = 1
    pool_size: int = 2
    time_step: int = 5
    n_features: int = 128
    n_classes: int = 4
    epochs: int = 800
    learning_rate: float = 0.01
    momentum: float = 0.0
    batch_size: Optional[int] = None
    seed: int = 0

    kind = "cnn"

    def __post_init__(self):
        object.__setattr__(self, "filters", tuple(int(f) for f in self.filters))
        if self.conv_layers < 0:
            raise ConfigError("conv_layers must be >= 0")
        if len(self.filters) != self.conv_layers:
            raise ConfigError(f"{len(self.filters)} filter counts for {self.conv_layers} conv layers")
        if any(f < 1 for f in self.filters):
            raise ConfigError("filter counts must be >= 1")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ConfigError("kernel_size must be odd")
        if self.stride < 1:
            raise ConfigError("stride must be >= 1")
        if self.pool_size < 2:
            raise ConfigError("pool_size must be >= 2")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        h, w = self.pooled_shape()
        if h < 1 or w < 1:
            raise ConfigError(
                f"pooled feature map is {h}x{w}; a {self.time_step}x{self.n_features} window "
                f"is too small for pool size {self.pool_size}"
            )

    def conv_shape(self) -> tuple[int, int]:
        h, w = self.time_step, self.n_features
        pad = self.kernel_size // 2
        for _ in range(self.conv_layers):
            h = (h + 2 * pad - self.kernel_size) // self.stride + 1
            w = (w + 2 * pad - self.kernel_size) // self.stride + 1
        return h, w

    def pooled_shape(self) -> tuple[int, int]:
        h, w = self.conv_shape()
        return h // self.pool_size, w // self.pool_size


def conv2d_forward(x: np.ndarray, W: np.ndarray, b: np.ndarray, stride: int = 1):
    """Zero-padded ('same' for stride 1) cross-correlation.

    x: (N, C, H, W), W: (F, C, k, k) -> (N, F, Ho, Wo)
    """
    k = W.shape[-1]
    pad = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    N, _, Hp, Wp = xp.shape
    Ho = (Hp - k) // stride + 1
    Wo = (Wp - k) // stride + 1
    out = np.zeros((N, Ho, Wo, W.shape[0]))
    for i in range(k):
        for j in range(k):
            patch = xp[:, :, i : i + stride * Ho : stride, j : j + stride * Wo : stride]
            out += np.tensordot(patch, W[:, :, i, j], axes=([1], [1]))
    out = out.transpose(0, 3, 1, 2) + b[None, :, None, None]
    return out, xp


def conv2d_backward(dout: np.ndarray, xp: np.ndarray, W: np.ndarray, stride: int = 1):
    k = W.shape[-1]
    pad = k // 2
    _, _, Ho, Wo = dout.shape
    dW = np.zeros_like(W)
    dxp = np.zeros_like(xp)
    for i in range(k):
        for j in range(k):
            sl = (slice(None), slice(None), slice(i, i + stride * Ho, stride), slice(j, j + stride * Wo, stride))
            dW[:, :, i, j] = np.tensordot(dout, xp[sl], axes=([0, 2, 3], [0, 2, 3]))
            dxp[sl] += np.tensordot(dout, W[:, :, i, j], axes=([1], [0])).transpose(0, 3, 1, 2)
    db = dout.sum(axis=(0, 2, 3))
    dx = dxp[:, :, pad : dxp.shape[2] - pad, pad : dxp.shape[3] - pad]
    return dx, dW, db


def maxpool_forward(x: np.ndarray, p: int):
    N, C, H, W = x.shape
    Hp, Wp = H // p, W // p
    win = (
        x[:, :, : Hp * p, : Wp * p]
        .reshape(N, C, Hp, p, Wp, p)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(N, C, Hp, Wp, p * p)
    )
    idx = win.argmax(axis=-1)
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return out, (x.shape, idx)


def maxpool_backward(dout: np.ndarray, cache, p: int):
    shape, idx = cache
    N, C, H, W = shape
    Hp, Wp = H // p, W // p
    dwin = np.zeros((N, C, Hp, Wp, p * p))
    np.put_along_axis(dwin, idx[..., None], dout[..., None], axis=-1)
    dx = np.zeros(shape)
    dx[:, :, : Hp * p, : Wp * p] = (
        dwin.reshape(N, C, Hp, Wp, p, p).transpose(0, 1, 2, 4, 3, 5).reshape(N, C, Hp * p, Wp * p)
    )
    return dx


class CnnNetwork:
    def __init__(self, config: CnnConfig):
        self.config = config

    def registry(self) -> Registry:
        cfg = self.config
        reg: Registry = []
        c_in = 1
        for layer, f in enumerate(cfg.filters):
            reg += [
                (f"conv{layer}.W", (f, c_in, cfg.kernel_size, cfg.kernel_size)),
                (f"conv{layer}.b", (f,)),
            ]
            c_in = f
        h, w = cfg.pooled_shape()
        reg += [("dense.W", (c_in * h * w, cfg.n_classes)), ("dense.b", (cfg.n_classes,))]
        return reg

    def forward(self, p: dict, X: np.ndarray):
        cfg = self.config
        a = X[:, None, :, :]
        convs = []
        for layer in range(cfg.conv_layers):
            z, xp = conv2d_forward(a, p[f"conv{layer}.W"], p[f"conv{layer}.b"], cfg.stride)
            a = np.maximum(z, 0.0)
            convs.append((xp, z))
        pooled, pool_cache = maxpool_forward(a, cfg.pool_size)
        feats = pooled.reshape(pooled.shape[0], -1)
        logits = feats @ p["dense.W"] + p["dense.b"]
        return logits, {"convs": convs, "pool": pool_cache, "pooled_shape": pooled.shape, "feats": feats}

    def backward(self, p: dict, cache: dict, dlogits: np.ndarray) -> dict:
        cfg = self.config
        grads = {
            "dense.W": cache["feats"].T @ dlogits,
            "dense.b": dlogits.sum(axis=0),
        }
        dpooled = (dlogits @ p["dense.W"].T).reshape(cache["pooled_shape"])
        da = maxpool_backward(dpooled, cache["pool"], cfg.pool_size)
        for layer in reversed(range(cfg.conv_layers)):
            xp, z = cache["convs"][layer]
            dz = da * (z > 0)
            da, dW, db = conv2d_backward(dz, xp, p[f"conv{layer}.W"], cfg.stride)
            grads[f"conv{layer}.W"] = dW
            grads[f"conv{layer}.b"] = db
        return grads
