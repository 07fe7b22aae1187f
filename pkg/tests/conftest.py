import numpy as np

from spanrl.mlp import MlpNetwork
from spanrl.span import SpanNetwork


def smooth_fd_inputs(net, rng, batch, margin=1e-3, tries=50):
    """Draw inputs on which the network is locally smooth.

    Central finite differences are only a valid oracle away from kinks:
    ReLU units switching sign, or degree-1 spline knots.  Inputs whose
    pre-activations (or sigmoid images) sit within ``margin`` of such a point
    are redrawn.
    """
    for _ in range(tries):
        x = rng.normal(size=(batch, net.in_dim))
        if _is_smooth_at(net, x, margin):
            return x
    raise AssertionError("could not find inputs clear of non-smooth points")


def _is_smooth_at(net, x, margin):
    if isinstance(net, MlpNetwork):
        if net.cfg.activation != "relu":
            return True
        a1_pre = x @ net.w1.T + net.b1
        a2_pre = np.maximum(a1_pre, 0.0) @ net.w2.T + net.b2
        return (np.abs(a1_pre) > margin).all() and (np.abs(a2_pre) > margin).all()
    if isinstance(net, SpanNetwork):
        if net.cfg.degree >= 2:
            return True
        z = 1.0 / (1.0 + np.exp(-(x @ net.w_pre.T + net.b_pre)))
        knots = np.unique(net.basis.knots)
        dist = np.min(np.abs(z[..., None] - knots), axis=-1)
        return (dist > margin).all()
    return True
