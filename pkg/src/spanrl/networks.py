"""Factory helpers mapping (kind, architecture fields) to network instances."""

from __future__ import annotations

from typing import Dict

import numpy as np

from .mlp import MlpConfig, MlpNetwork
from .span import SpanConfig, SpanNetwork


def build_network(kind: str, in_dim: int, out_dim: int, arch: Dict,
                  rng: np.random.Generator, final_scale: float = 1.0):
    """Construct a spline or MLP network from flat architecture fields.

    ``final_scale`` shrinks the MLP output layer (policy-head stabilizer);
    the spline network's head init is already O(1) and ignores it.
    """
    if kind == "span":
        cfg = SpanConfig(
            in_dim=in_dim,
            out_dim=out_dim,
            nmodes=int(arch["nmodes"]),
            nelems=int(arch["nelems"]),
            degree=int(arch["degree"]),
        )
        return SpanNetwork(cfg, rng)
    if kind == "mlp":
        cfg = MlpConfig(
            in_dim=in_dim,
            hidden1=int(arch["hidden1"]),
            hidden2=int(arch["hidden2"]),
            out_dim=out_dim,
            activation=arch.get("activation", "tanh"),
        )
        return MlpNetwork(cfg, rng, final_scale=final_scale)
    raise ValueError(f"unknown network kind {kind!r}")


def network_from_meta(meta: Dict, values: Dict[str, np.ndarray]):
    """Rebuild a network from checkpoint metadata and load its parameters."""
    rng = np.random.default_rng(0)  # placeholder init, overwritten below
    kind = meta["kind"]
    if kind == "span":
        arch = {k: meta[k] for k in ("nmodes", "nelems", "degree")}
        net = build_network("span", meta["in_dim"], meta["out_dim"], arch, rng)
    elif kind == "mlp":
        arch = {k: meta[k] for k in ("hidden1", "hidden2", "activation")}
        net = build_network("mlp", meta["in_dim"], meta["out_dim"], arch, rng,
                            final_scale=meta.get("final_scale", 1.0))
    else:
        raise ValueError(f"unknown network kind {kind!r}")
    net.store.load_values(values)
    return net
