"""Stacked LSTM followed by a dense softmax layer."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import ConfigError
from .params import Registry, sigmoid


@dataclass(frozen=True)
class LstmConfig:
    layers: int = 2
    hidden_nodes: int = 100
    time_step: int = 1
    n_features: int = 128
    n_classes: int = 4
    epochs: int = 800
    learning_rate: float = 0.01
    momentum: float = 0.0
    batch_size: Optional[int] = None
    seed: int = 0

    kind = "lstm"

    def __post_init__(self):
        if self.layers < 0:
            raise ConfigError("layers must be >= 0")
        if self.hidden_nodes < 1:
            raise ConfigError("hidden_nodes must be >= 1")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.time_step < 1 or self.n_features < 1 or self.n_classes < 2:
            raise ConfigError("time_step, n_features must be >= 1 and n_classes >= 2")


class LstmNetwork:
    """Gate layout inside each weight matrix: input, forget, output, candidate.

    ``layers == 0`` degenerates to softmax regression on the flattened window.
    """

    def __init__(self, config: LstmConfig):
        self.config = config

    def registry(self) -> Registry:
        cfg = self.config
        reg: Registry = []
        d, H = cfg.n_features, cfg.hidden_nodes
        for layer in range(cfg.layers):
            reg += [
                (f"lstm{layer}.W", (d, 4 * H)),
                (f"lstm{layer}.U", (H, 4 * H)),
                (f"lstm{layer}.b", (4 * H,)),
            ]
            d = H
        if cfg.layers == 0:
            d = cfg.time_step * cfg.n_features
        reg += [("dense.W", (d, cfg.n_classes)), ("dense.b", (cfg.n_classes,))]
        return reg

    def forward(self, p: dict, X: np.ndarray):
        cfg = self.config
        N = X.shape[0]
        if cfg.layers == 0:
            feats = X.reshape(N, -1)
            return feats @ p["dense.W"] + p["dense.b"], {"feats": feats, "layers": []}
        seq, layer_caches = X, []
        for layer in range(cfg.layers):
            seq, cache = self._layer_forward(p, layer, seq)
            layer_caches.append(cache)
        feats = seq[:, -1, :]
        return feats @ p["dense.W"] + p["dense.b"], {"feats": feats, "layers": layer_caches}

    def _layer_forward(self, p, layer, xs):
        W, U, b = p[f"lstm{layer}.W"], p[f"lstm{layer}.U"], p[f"lstm{layer}.b"]
        N, T, _ = xs.shape
        H = U.shape[0]
        h = np.zeros((N, H))
        c = np.zeros((N, H))
        hs = np.empty((N, T, H))
        steps = []
        for t in range(T):
            z = xs[:, t] @ W + h @ U + b
            i = sigmoid(z[:, :H])
            f = sigmoid(z[:, H : 2 * H])
            o = sigmoid(z[:, 2 * H : 3 * H])
            g = np.tanh(z[:, 3 * H :])
            c_prev, h_prev = c, h
            c = f * c_prev + i * g
            tc = np.tanh(c)
            h = o * tc
            hs[:, t] = h
            steps.append((i, f, o, g, c_prev, h_prev, tc))
        return hs, {"xs": xs, "steps": steps}

    def backward(self, p: dict, cache: dict, dlogits: np.ndarray) -> dict:
        cfg = self.config
        grads = {
            "dense.W": cache["feats"].T @ dlogits,
            "dense.b": dlogits.sum(axis=0),
        }
        dfeats = dlogits @ p["dense.W"].T
        if cfg.layers == 0:
            return grads
        top = cache["layers"][-1]
        N, T, _ = top["xs"].shape
        dhs = np.zeros((N, T, cfg.hidden_nodes))
        dhs[:, -1] = dfeats
        for layer in reversed(range(cfg.layers)):
            dhs = self._layer_backward(p, layer, cache["layers"][layer], dhs, grads)
        return grads

    def _layer_backward(self, p, layer, cache, dhs, grads):
        W, U = p[f"lstm{layer}.W"], p[f"lstm{layer}.U"]
        xs = cache["xs"]
        N, T, _ = xs.shape
        H = U.shape[0]
        dW = np.zeros_like(W)
        dU = np.zeros_like(U)
        db = np.zeros(4 * H)
        dxs = np.empty_like(xs)
        dh_next = np.zeros((N, H))
        dc_next = np.zeros((N, H))
        for t in reversed(range(T)):
            i, f, o, g, c_prev, h_prev, tc = cache["steps"][t]
            dh = dhs[:, t] + dh_next
            do = dh * tc
            dc = dc_next + dh * o * (1.0 - tc * tc)
            di = dc * g
            df = dc * c_prev
            dg = dc * i
            dc_next = dc * f
            dz = np.concatenate(
                [di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dg * (1 - g * g)], axis=1
            )
            dW += xs[:, t].T @ dz
            dU += h_prev.T @ dz
            db += dz.sum(axis=0)
            dxs[:, t] = dz @ W.T
            dh_next = dz @ U.T
        grads[f"lstm{layer}.W"] = dW
        grads[f"lstm{layer}.U"] = dU
        grads[f"lstm{layer}.b"] = db
        return dxs
