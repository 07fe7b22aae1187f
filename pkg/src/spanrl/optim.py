"""Parameter storage, the Adam update, and finite-difference gradient checking.

All trainable state in this package lives in a :class:`ParamStore`: an ordered
collection of named float64 arrays, each paired with a gradient slot of the
same shape plus Adam moment accumulators.  Networks hold references into the
store and accumulate gradients in place; the training loops call
:func:`adam_step` once per minibatch.

Arrays are plain ``numpy.ndarray`` in float64 throughout (row-major).  Every
network's hand-derived backward pass is validated against :func:`grad_check`,
which compares analytic gradients with central finite differences on randomly
probed scalar parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Optional, Tuple

import numpy as np

from .errors import DimensionError, TrainingFault


def as_f64(x) -> np.ndarray:
    """Materialize ``x`` as a contiguous float64 array."""
    return np.ascontiguousarray(np.asarray(x, dtype=np.float64))


def matvec(w: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Matrix-vector product with explicit shape validation."""
    w = np.asarray(w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if w.ndim != 2 or x.ndim != 1:
        raise DimensionError(f"matvec expects rank-2 and rank-1 operands, got {w.shape} and {x.shape}")
    if w.shape[1] != x.shape[0]:
        raise DimensionError(f"matvec mismatch: {w.shape} @ {x.shape}")
    return w @ x


@dataclass
class AdamConfig:
    """Adam hyperparameters; ``max_grad_norm`` enables global-norm clipping."""

    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    max_grad_norm: Optional[float] = None

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


@dataclass
class _Entry:
    value: np.ndarray
    grad: np.ndarray
    m: np.ndarray
    v: np.ndarray


class ParamStore:
    """Ordered map name -> (value, grad, Adam moments) with a shared step count."""

    def __init__(self):
        self._entries: Dict[str, _Entry] = {}
        self.t = 0

    def add(self, name: str, value) -> np.ndarray:
        """Register a parameter array and return the live value reference."""
        if name in self._entries:
            raise KeyError(f"duplicate parameter name {name!r}")
        value = as_f64(value)
        self._entries[name] = _Entry(
            value=value,
            grad=np.zeros_like(value),
            m=np.zeros_like(value),
            v=np.zeros_like(value),
        )
        return value

    def names(self):
        return list(self._entries.keys())

    def value(self, name: str) -> np.ndarray:
        return self._entries[name].value

    def grad(self, name: str) -> np.ndarray:
        return self._entries[name].grad

    def items(self) -> Iterable[Tuple[str, np.ndarray, np.ndarray]]:
        for name, e in self._entries.items():
            yield name, e.value, e.grad

    @property
    def num_params(self) -> int:
        return sum(e.value.size for e in self._entries.values())

    def zero_grads(self):
        for e in self._entries.values():
            e.grad[...] = 0.0

    def global_grad_norm(self) -> float:
        sq = 0.0
        for e in self._entries.values():
            g = e.grad
            sq += float(np.dot(g.ravel(), g.ravel()))
        return float(np.sqrt(sq))

    def values_dict(self) -> Dict[str, np.ndarray]:
        return {name: e.value.copy() for name, e in self._entries.items()}

    def load_values(self, arrays: Dict[str, np.ndarray]):
        """Overwrite parameter values in place from a name -> array mapping."""
        for name, e in self._entries.items():
            src = as_f64(arrays[name])
            if src.shape != e.value.shape:
                raise DimensionError(f"entry {name!r}: expected {e.value.shape}, got {src.shape}")
            e.value[...] = src

    def copy_values_from(self, other: "ParamStore"):
        for name, e in self._entries.items():
            e.value[...] = other._entries[name].value


def adam_step(store: ParamStore, cfg: AdamConfig):
    """Apply one bias-corrected Adam update to every entry, then zero gradients.

    If ``cfg.max_grad_norm`` is set, the concatenated gradient is rescaled so
    its global L2 norm does not exceed the threshold (direction preserved).
    """
    for name, e in store._entries.items():
        if not np.all(np.isfinite(e.grad)):
            raise TrainingFault(f"non-finite gradient in entry {name!r}", entry=name)

    if cfg.max_grad_norm is not None:
        norm = store.global_grad_norm()
        if norm > cfg.max_grad_norm:
            scale = cfg.max_grad_norm / norm
            for e in store._entries.values():
                e.grad *= scale

    store.t += 1
    bc1 = 1.0 - cfg.beta1 ** store.t
    bc2 = 1.0 - cfg.beta2 ** store.t
    for e in store._entries.values():
        g = e.grad
        e.m *= cfg.beta1
        e.m += (1.0 - cfg.beta1) * g
        e.v *= cfg.beta2
        e.v += (1.0 - cfg.beta2) * g * g
        e.value -= cfg.lr * (e.m / bc1) / (np.sqrt(e.v / bc2) + cfg.epsilon)
        g[...] = 0.0


def soft_update(target: ParamStore, online: ParamStore, tau: float):
    """target <- (1 - tau) * target + tau * online, elementwise per entry."""
    for name, e in target._entries.items():
        src = online._entries[name].value
        e.value *= 1.0 - tau
        e.value += tau * src


def grad_check(
    loss_fn: Callable[[], float],
    store: ParamStore,
    probes: int,
    rng: np.random.Generator,
    h: float = 1e-5,
    scale_floor: float = 1e-3,
) -> float:
    """Worst relative error between analytic and central-FD gradients.

    ``loss_fn`` evaluates the scalar loss and, as a side effect, accumulates
    analytic gradients into ``store``.  ``probes`` scalar parameters are chosen
    uniformly at random; each is perturbed by ``+-h`` for a central difference.
    The relative error denominator is floored at ``scale_floor`` so near-zero
    gradients are compared in absolute terms.
    """
    store.zero_grads()
    loss_fn()
    analytic = {name: store.grad(name).copy() for name in store.names()}

    names = store.names()
    sizes = np.array([store.value(n).size for n in names])
    cum = np.cumsum(sizes)
    total = int(cum[-1])

    worst = 0.0
    for _ in range(probes):
        flat = int(rng.integers(0, total))
        which = int(np.searchsorted(cum, flat, side="right"))
        offset = flat - (0 if which == 0 else int(cum[which - 1]))
        name = names[which]
        value = store.value(name).ravel()

        orig = value[offset]
        value[offset] = orig + h
        store.zero_grads()
        f_plus = loss_fn()
        value[offset] = orig - h
        store.zero_grads()
        f_minus = loss_fn()
        value[offset] = orig

        fd = (f_plus - f_minus) / (2.0 * h)
        a = analytic[name].ravel()[offset]
        denom = max(abs(a), abs(fd), scale_floor)
        worst = max(worst, abs(a - fd) / denom)

    store.zero_grads()
    return worst
