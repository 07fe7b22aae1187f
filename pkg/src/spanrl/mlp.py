"""Two-hidden-layer MLP baseline with a hand-coded backward pass.

Matched-budget counterpart of the spline network: tanh hidden units for the
on-policy runs, ReLU for the off-policy/offline ones.  ``final_scale`` shrinks
the output layer at init (the usual small-logits stabilizer for policy heads).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .optim import ParamStore

_ACTIVATIONS = ("tanh", "relu")


@dataclass(frozen=True)
class MlpConfig:
    in_dim: int
    hidden1: int
    hidden2: int
    out_dim: int
    activation: str = "tanh"

    def __post_init__(self):
        for name in ("in_dim", "hidden1", "hidden2", "out_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"activation must be one of {_ACTIVATIONS}")


def mlp_param_count(cfg: MlpConfig) -> int:
    d, h1, h2, o = cfg.in_dim, cfg.hidden1, cfg.hidden2, cfg.out_dim
    return (d * h1 + h1) + (h1 * h2 + h2) + (h2 * o + o)


@dataclass
class MlpCache:
    x: np.ndarray
    a1: np.ndarray
    a2: np.ndarray


class MlpNetwork:
    kind = "mlp"

    def __init__(self, cfg: MlpConfig, rng: np.random.Generator, final_scale: float = 1.0):
        self.cfg = cfg
        self.final_scale = float(final_scale)
        store = ParamStore()

        def fan_in(n_in, n_out, scale=1.0):
            bound = scale / np.sqrt(n_in)
            return rng.uniform(-bound, bound, size=(n_out, n_in))

        self.w1 = store.add("w1", fan_in(cfg.in_dim, cfg.hidden1))
        self.b1 = store.add("b1", np.zeros(cfg.hidden1))
        self.w2 = store.add("w2", fan_in(cfg.hidden1, cfg.hidden2))
        self.b2 = store.add("b2", np.zeros(cfg.hidden2))
        self.w3 = store.add("w3", fan_in(cfg.hidden2, cfg.out_dim, scale=self.final_scale))
        self.b3 = store.add("b3", np.zeros(cfg.out_dim))
        self.store = store
        assert store.num_params == mlp_param_count(cfg)

    @property
    def in_dim(self):
        return self.cfg.in_dim

    @property
    def out_dim(self):
        return self.cfg.out_dim

    @property
    def param_count(self) -> int:
        return self.store.num_params

    def meta(self) -> dict:
        return {
            "kind": self.kind,
            "in_dim": self.cfg.in_dim,
            "hidden1": self.cfg.hidden1,
            "hidden2": self.cfg.hidden2,
            "out_dim": self.cfg.out_dim,
            "activation": self.cfg.activation,
            "final_scale": self.final_scale,
        }

    def _act(self, pre):
        if self.cfg.activation == "tanh":
            return np.tanh(pre)
        return np.maximum(pre, 0.0)

    def _act_grad(self, a):
        if self.cfg.activation == "tanh":
            return 1.0 - a * a
        return (a > 0.0).astype(np.float64)

    def forward(self, x, need_cache: bool = False):
        squeeze = np.asarray(x).ndim == 1
        x = np.asarray(x, dtype=np.float64)
        if squeeze:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.cfg.in_dim:
            raise InputError(f"expected (*, {self.cfg.in_dim}) input, got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise InputError("non-finite network input")

        a1 = self._act(x @ self.w1.T + self.b1)
        a2 = self._act(a1 @ self.w2.T + self.b2)
        out = a2 @ self.w3.T + self.b3
        y = out[0] if squeeze else out
        if not need_cache:
            return y
        return y, MlpCache(x=x, a1=a1, a2=a2)

    def backward(self, cache: MlpCache, dout, input_grad: bool = False,
                 param_grads: bool = True):
        dout = np.asarray(dout, dtype=np.float64)
        if dout.ndim == 1:
            dout = dout[None, :]
        store = self.store

        if param_grads:
            store.grad("w3")[...] += dout.T @ cache.a2
            store.grad("b3")[...] += dout.sum(axis=0)
        d2 = (dout @ self.w3) * self._act_grad(cache.a2)
        if param_grads:
            store.grad("w2")[...] += d2.T @ cache.a1
            store.grad("b2")[...] += d2.sum(axis=0)
        d1 = (d2 @ self.w2) * self._act_grad(cache.a1)
        if param_grads:
            store.grad("w1")[...] += d1.T @ cache.x
            store.grad("b1")[...] += d1.sum(axis=0)
        if input_grad:
            return d1 @ self.w1
        return None
