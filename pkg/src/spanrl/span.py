"""Separable spline network: sigmoid preprocessing, rank-M tensor-product core.

Forward pass for an input ``s`` of dimension ``d``:

    z    = sigmoid(W_pre @ s + b_pre)                  (d,)  -> unit cube
    S_pj = sum_i w[p, j, i] * B_i(z_p)                 per-dimension sums
    m_j  = prod_p S_pj                                 separable modes, j = 1..M
    out  = W_head @ m + b_head                         (o,)

The per-dimension B-spline expansion shares one clamped uniform basis across
dimensions and modes.  Because the sigmoid compactifies the input, spline
evaluation never leaves [0, 1] and outputs are finite for any real input.

The backward pass is hand-derived reverse accumulation.  The only non-obvious
piece is the product across dimensions, handled with prefix/suffix products so
zero-valued sums do not poison the quotient trick:

    d m_j / d S_pj = prod_{q != p} S_qj = left[p] * right[p]

Gradients accumulate into the network's ParamStore; the optional input
gradient supports critics differentiated with respect to actions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bspline import SplineBasis
from .errors import InputError
from .optim import ParamStore


@dataclass(frozen=True)
class SpanConfig:
    in_dim: int
    out_dim: int
    nmodes: int
    nelems: int
    degree: int

    def __post_init__(self):
        for name in ("in_dim", "out_dim", "nmodes", "nelems", "degree"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")


def span_param_count(cfg: SpanConfig) -> int:
    """(d^2 + d) preprocessing + M*d*(N+k) spline weights + (M*o + o) head."""
    d, o, m = cfg.in_dim, cfg.out_dim, cfg.nmodes
    nb = cfg.nelems + cfg.degree
    return (d * d + d) + m * d * nb + (m * o + o)


@dataclass
class SpanCache:
    """Forward workspace retained for the matching backward call."""

    x: np.ndarray      # (B, d) raw inputs
    z: np.ndarray      # (B, d) sigmoid outputs
    phi: np.ndarray    # (B, d, nb) basis values at z
    sums: np.ndarray   # (B, d, M) per-dimension weighted sums
    modes: np.ndarray  # (B, M)


class SpanNetwork:
    """Rank-M separable spline approximator with hand-coded forward/backward."""

    kind = "span"

    def __init__(self, cfg: SpanConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.basis = SplineBasis(cfg.nelems, cfg.degree)
        d, o, m = cfg.in_dim, cfg.out_dim, cfg.nmodes
        nb = self.basis.nbasis

        store = ParamStore()
        # Spline weights start near 1 so each per-dimension sum is ~1 by
        # partition of unity and the d-fold product stays O(1) at any d.
        bound = 1.0 / np.sqrt(d)
        self.w_pre = store.add("w_pre", rng.uniform(-bound, bound, size=(d, d)))
        self.b_pre = store.add("b_pre", np.zeros(d))
        self.w_spline = store.add("w_spline", 1.0 + rng.uniform(-0.1, 0.1, size=(d, m, nb)))
        hb = 1.0 / np.sqrt(m)
        self.w_head = store.add("w_head", rng.uniform(-hb, hb, size=(o, m)))
        self.b_head = store.add("b_head", np.zeros(o))
        self.store = store
        assert store.num_params == span_param_count(cfg)

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
            "out_dim": self.cfg.out_dim,
            "nmodes": self.cfg.nmodes,
            "nelems": self.cfg.nelems,
            "degree": self.cfg.degree,
        }

    def _prep(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.cfg.in_dim:
            raise InputError(f"expected (*, {self.cfg.in_dim}) input, got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise InputError("non-finite network input")
        return x

    def forward(self, x, need_cache: bool = False):
        """Evaluate the network on a batch (B, d) or single vector (d,).

        Returns the outputs, or ``(outputs, cache)`` when ``need_cache`` is
        set; the cache feeds :meth:`backward`.
        """
        squeeze = np.asarray(x).ndim == 1
        x = self._prep(x)
        b, d = x.shape
        m = self.cfg.nmodes

        z = 1.0 / (1.0 + np.exp(-(x @ self.w_pre.T + self.b_pre)))
        phi = self.basis.eval(z.ravel()).reshape(b, d, -1)
        # sums[b,p,j] = sum_i phi[b,p,i] w[p,j,i], via a stacked matmul
        sums = (phi.transpose(1, 0, 2) @ self.w_spline.transpose(0, 2, 1)).transpose(1, 0, 2)
        modes = np.prod(sums, axis=1)
        out = modes @ self.w_head.T + self.b_head

        y = out[0] if squeeze else out
        if not need_cache:
            return y
        return y, SpanCache(x=x, z=z, phi=phi, sums=sums, modes=modes)

    def backward(self, cache: SpanCache, dout, input_grad: bool = False,
                 param_grads: bool = True):
        """Accumulate parameter gradients for the cached forward pass.

        ``dout`` has shape (B, o) (or (o,) for a single-sample cache).  With
        ``input_grad`` the gradient with respect to the raw input is returned.
        ``param_grads=False`` skips parameter accumulation, for callers that
        only need input gradients (e.g. a frozen critic inside an actor loss).
        """
        dout = np.asarray(dout, dtype=np.float64)
        if dout.ndim == 1:
            dout = dout[None, :]
        b, d = cache.x.shape

        store = self.store
        if param_grads:
            store.grad("w_head")[...] += dout.T @ cache.modes
            store.grad("b_head")[...] += dout.sum(axis=0)
        dmodes = dout @ self.w_head  # (B, M)

        # prefix/suffix products over the dimension axis
        sums = cache.sums
        left = np.ones_like(sums)
        if d > 1:
            np.cumprod(sums[:, :-1, :], axis=1, out=left[:, 1:, :])
        right = np.ones_like(sums)
        if d > 1:
            rev = np.cumprod(sums[:, ::-1, :], axis=1)
            right[:, :-1, :] = rev[:, -2::-1, :]
        dsums = dmodes[:, None, :] * left * right  # (B, d, M)

        if param_grads:
            store.grad("w_spline")[...] += dsums.transpose(1, 2, 0) @ cache.phi.transpose(1, 0, 2)

        dphi = self.basis.eval_deriv(cache.z.ravel()).reshape(b, d, -1)
        slope = (dphi.transpose(1, 0, 2) @ self.w_spline.transpose(0, 2, 1)).transpose(1, 0, 2)
        dz = np.sum(dsums * slope, axis=2)  # (B, d)
        da = dz * cache.z * (1.0 - cache.z)  # through the sigmoid

        if param_grads:
            store.grad("w_pre")[...] += da.T @ cache.x
            store.grad("b_pre")[...] += da.sum(axis=0)
        if input_grad:
            return da @ self.w_pre
        return None
