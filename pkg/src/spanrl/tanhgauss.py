"""Tanh-squashed Gaussian policy head used by the off-policy and offline learners.

The actor network emits ``[mu; log_std]``; ``log_std`` is hard-clamped to
[-5, 2] before exponentiation (zero gradient outside the clamp).  Actions are
``a = scale * tanh(u)`` with ``u = mu + sigma * eps``.  The log-density of the
squashed action includes the change-of-variables correction

    log pi(a) = log N(u; mu, sigma) - sum_i [ log(1 - tanh(u_i)^2 + 1e-6) + log scale_i ].

Under reparameterization the standardized residual ``(u - mu) / sigma`` is the
fixed noise ``eps``, which makes the pathwise derivatives below exact.
"""

from __future__ import annotations

import numpy as np

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
SQUASH_EPS = 1e-6
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


def split_head(out: np.ndarray):
    """Split a (B, 2A) actor output into mean and raw log-std."""
    a = out.shape[-1] // 2
    return out[..., :a], out[..., a:]


def clamp_log_std(raw: np.ndarray):
    """Clamp raw log-std; the mask marks entries whose gradient passes through."""
    clamped = np.clip(raw, LOG_STD_MIN, LOG_STD_MAX)
    mask = ((raw > LOG_STD_MIN) & (raw < LOG_STD_MAX)).astype(np.float64)
    return clamped, mask


def sample(mu: np.ndarray, log_std: np.ndarray, eps: np.ndarray, scale: np.ndarray):
    """Reparameterized squashed sample.

    Returns (action, log_prob, u, y) where y = tanh(u) and action = scale * y.
    """
    sigma = np.exp(log_std)
    u = mu + sigma * eps
    y = np.tanh(u)
    action = scale * y
    logp = np.sum(
        -0.5 * eps * eps - log_std - _HALF_LOG_2PI
        - np.log(1.0 - y * y + SQUASH_EPS) - np.log(scale),
        axis=-1,
    )
    return action, logp, u, y


def mean_action(mu: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """Deterministic action used for evaluation."""
    return scale * np.tanh(mu)


def squash_correction_grad(y: np.ndarray) -> np.ndarray:
    """d/du of -log(1 - tanh(u)^2 + eps), elementwise."""
    return 2.0 * y * (1.0 - y * y) / (1.0 - y * y + SQUASH_EPS)


def logprob_of(mu: np.ndarray, log_std: np.ndarray, action: np.ndarray, scale: np.ndarray):
    """Log-density of given (already squashed) actions under the policy.

    Pre-squash values are recovered through atanh with the ratio clipped to
    +-(1 - 1e-6), so bound-saturated dataset actions stay finite.

    Returns (logp, z, y) with z the standardized residual (u - mu) / sigma.
    """
    sigma = np.exp(log_std)
    y = np.clip(action / scale, -1.0 + 1e-6, 1.0 - 1e-6)
    u = np.arctanh(y)
    z = (u - mu) / sigma
    logp = np.sum(
        -0.5 * z * z - log_std - _HALF_LOG_2PI
        - np.log(1.0 - y * y + SQUASH_EPS) - np.log(scale),
        axis=-1,
    )
    return logp, z, y
