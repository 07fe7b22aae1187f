"""On-policy clipped-surrogate policy optimization for discrete-action tasks.

The learner alternates fixed-size rollout collection with several epochs of
minibatch updates.  Advantages come from exponentially weighted temporal
differences; episode boundaries cut the accumulation, and horizon truncation
(unlike failure termination) bootstraps from the value of the successor state.
Actor and critic are independent networks of either kind ("span" or "mlp"),
each with its own optimizer state; gradients are clipped by global norm per
network.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Dict, Optional

import numpy as np

from . import rngstream
from .envs import env_spec, make_env
from .errors import TrainingFault
from .metrics import EvalRecord, summarize_run
from .networks import build_network
from .optim import AdamConfig, adam_step
from .runner import TrainOutput, evaluate_policy


@dataclass(frozen=True)
class PpoConfig:
    rollout_steps: int = 1024
    minibatch: int = 64
    epochs: int = 4
    gamma: float = 0.99
    lam: float = 0.95
    clip_eps: float = 0.2
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    lr: float = 3e-4
    max_grad_norm: float = 0.5
    total_steps: int = 500_000
    eval_interval: int = 5000
    eval_episodes: int = 30
    normalize_advantages: bool = True

    def __post_init__(self):
        if self.rollout_steps % self.minibatch != 0:
            raise ValueError("rollout_steps must be divisible by minibatch")
        if not (0 < self.gamma < 1 and 0 <= self.lam <= 1 and self.clip_eps > 0):
            raise ValueError("invalid gamma/lambda/clip settings")


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def categorical_entropy(logits: np.ndarray) -> np.ndarray:
    lp = log_softmax(logits)
    return -(np.exp(lp) * lp).sum(axis=-1)


def sample_categorical(logits: np.ndarray, u: float) -> int:
    """Inverse-CDF draw from softmax(logits) using one uniform."""
    lp = log_softmax(logits)
    cdf = np.cumsum(np.exp(lp))
    return int(min(np.searchsorted(cdf, u, side="right"), lp.shape[-1] - 1))


class RolloutBuffer:
    """Fixed-capacity on-policy storage with advantage/return slots."""

    def __init__(self, capacity: int, obs_dim: int):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.logprobs = np.zeros(capacity)
        self.rewards = np.zeros(capacity)
        self.values = np.zeros(capacity)
        self.terminated = np.zeros(capacity)
        self.episode_end = np.zeros(capacity)
        # value of the successor state; consulted at episode ends and the tail
        self.boundary_values = np.zeros(capacity)
        self.advantages = np.zeros(capacity)
        self.returns = np.zeros(capacity)
        self.size = 0

    def add(self, obs, action, logprob, reward, value, terminated, episode_end,
            boundary_value=0.0):
        i = self.size
        self.obs[i] = obs
        self.actions[i] = action
        self.logprobs[i] = logprob
        self.rewards[i] = reward
        self.values[i] = value
        self.terminated[i] = float(terminated)
        self.episode_end[i] = float(episode_end)
        self.boundary_values[i] = boundary_value
        self.size += 1

    def set_tail_value(self, value: float):
        """Bootstrap value for a rollout that ends mid-episode."""
        if self.size and not self.episode_end[self.size - 1]:
            self.boundary_values[self.size - 1] = value


def compute_gae(buffer: RolloutBuffer, gamma: float, lam: float):
    """Fill the buffer's advantage and return slots.

        delta_t = r_t + gamma * V(s_{t+1}) * (1 - terminated_t) - V(s_t)
        A_t     = delta_t + gamma * lam * (1 - episode_end_t) * A_{t+1}

    Truncated (not failed) episode ends bootstrap from the stored successor
    value; failure terminations contribute no bootstrap.  Returns are A + V.
    """
    n = buffer.size
    next_values = np.empty(n)
    next_values[: n - 1] = buffer.values[1:n]
    next_values[n - 1] = buffer.boundary_values[n - 1]
    ends = buffer.episode_end[:n] > 0
    next_values[ends] = buffer.boundary_values[:n][ends]

    delta = (
        buffer.rewards[:n]
        + gamma * next_values * (1.0 - buffer.terminated[:n])
        - buffer.values[:n]
    )
    adv = np.zeros(n)
    running = 0.0
    for t in range(n - 1, -1, -1):
        running = delta[t] + gamma * lam * (1.0 - buffer.episode_end[t]) * running
        adv[t] = running
    buffer.advantages[:n] = adv
    buffer.returns[:n] = adv + buffer.values[:n]
    return adv.copy(), buffer.returns[:n].copy()


def ppo_update(actor, critic, buffer: RolloutBuffer, cfg: PpoConfig,
               rng: np.random.Generator) -> Dict[str, float]:
    """Run the clipped-surrogate epochs over the collected rollout."""
    n = buffer.size
    adv = buffer.advantages[:n].copy()
    if cfg.normalize_advantages and n > 1:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)

    adam_actor = AdamConfig(lr=cfg.lr, max_grad_norm=cfg.max_grad_norm)
    adam_critic = AdamConfig(lr=cfg.lr, max_grad_norm=cfg.max_grad_norm)

    pol_losses, val_losses, entropies = [], [], []
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.minibatch):
            idx = perm[start : start + cfg.minibatch]
            b = idx.shape[0]
            obs_mb = buffer.obs[idx]
            act_mb = buffer.actions[idx]
            adv_mb = adv[idx]
            old_lp = buffer.logprobs[idx]
            ret_mb = buffer.returns[idx]

            logits, cache_a = actor.forward(obs_mb, need_cache=True)
            lp_all = log_softmax(logits)
            p = np.exp(lp_all)
            lp_act = lp_all[np.arange(b), act_mb]
            ratio = np.exp(lp_act - old_lp)

            clipped = np.clip(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps)
            surrogate = np.minimum(ratio * adv_mb, clipped * adv_mb)
            pol_loss = -surrogate.mean()
            ent = -(p * lp_all).sum(axis=-1)

            if not np.isfinite(pol_loss):
                raise TrainingFault("non-finite policy loss", entry="policy")

            # gradient of -surrogate w.r.t. log pi(a|s): zero where the clip binds
            unclipped = ~(
                ((adv_mb >= 0) & (ratio >= 1.0 + cfg.clip_eps))
                | ((adv_mb < 0) & (ratio <= 1.0 - cfg.clip_eps))
            )
            coef = np.where(unclipped, -adv_mb * ratio, 0.0) / b
            onehot = np.zeros_like(p)
            onehot[np.arange(b), act_mb] = 1.0
            dlogits = coef[:, None] * (onehot - p)
            # entropy bonus: d(-c_e * H)/dlogits = c_e * p * (log p + H)
            dlogits += cfg.entropy_coef * p * (lp_all + ent[:, None]) / b
            actor.backward(cache_a, dlogits)
            adam_step(actor.store, adam_actor)

            values, cache_c = critic.forward(obs_mb, need_cache=True)
            resid = values[:, 0] - ret_mb
            val_loss = np.mean(resid * resid)
            if not np.isfinite(val_loss):
                raise TrainingFault("non-finite value loss", entry="value")
            critic.backward(cache_c, (cfg.value_coef * 2.0 * resid / b)[:, None])
            adam_step(critic.store, adam_critic)

            pol_losses.append(float(pol_loss))
            val_losses.append(float(val_loss))
            entropies.append(float(ent.mean()))

    return {
        "policy_loss": float(np.mean(pol_losses)),
        "value_loss": float(np.mean(val_losses)),
        "entropy": float(np.mean(entropies)),
    }


def greedy_action_batch(actor):
    def act(obs_batch: np.ndarray) -> np.ndarray:
        return np.argmax(actor.forward(obs_batch), axis=-1)

    return act


def ppo_train(env_name: str, net_kind: str, arch: Dict, cfg: PpoConfig, seed: int,
              fingerprint: str = "") -> TrainOutput:
    """Train on one seed and return the summary plus the trained networks."""
    t0 = time.perf_counter()
    spec = env_spec(env_name)
    if not spec.discrete:
        raise ValueError(f"{env_name} is not a discrete-action environment")

    arch = dict(arch)
    arch.setdefault("activation", "tanh")
    actor = build_network(net_kind, spec.obs_dim, spec.n_actions, arch,
                          rngstream.stream(seed, rngstream.NET_ACTOR), final_scale=0.01)
    critic = build_network(net_kind, spec.obs_dim, 1, arch,
                           rngstream.stream(seed, rngstream.NET_CRITIC))

    env = make_env(env_name, seed)
    action_rng = rngstream.stream(seed, rngstream.ACTION)
    update_rng = rngstream.stream(seed, rngstream.UPDATE)

    buffer = RolloutBuffer(cfg.rollout_steps, spec.obs_dim)
    curve = []
    global_step = 0
    next_eval = cfg.eval_interval
    eval_index = 0
    obs = env.reset()

    while global_step < cfg.total_steps:
        buffer.size = 0
        n_collect = min(cfg.rollout_steps, cfg.total_steps - global_step)
        for _ in range(n_collect):
            logits = actor.forward(obs)
            lp_all = log_softmax(logits)
            cdf = np.cumsum(np.exp(lp_all))
            action = int(min(np.searchsorted(cdf, action_rng.random(), side="right"),
                             lp_all.shape[-1] - 1))
            value = float(critic.forward(obs)[0])
            tr = env.step(action)
            boundary = 0.0
            if tr.truncated:
                boundary = float(critic.forward(tr.next_state)[0])
            buffer.add(obs, action, lp_all[action], tr.reward, value,
                       tr.terminated, tr.done, boundary)
            obs = tr.next_state if not tr.done else env.reset()
            global_step += 1
        if not buffer.episode_end[buffer.size - 1]:
            buffer.set_tail_value(float(critic.forward(obs)[0]))

        compute_gae(buffer, cfg.gamma, cfg.lam)
        try:
            ppo_update(actor, critic, buffer, cfg, update_rng)
        except TrainingFault as fault:
            fault.seed = seed
            raise

        while next_eval <= global_step:
            returns = evaluate_policy(env_name, seed, eval_index,
                                      greedy_action_batch(actor), cfg.eval_episodes)
            curve.append(EvalRecord(step=next_eval, returns=returns))
            next_eval += cfg.eval_interval
            eval_index += 1

    summary = summarize_run(
        seed=seed, env_name=env_name, algo="ppo", net=net_kind,
        fingerprint=fingerprint, total_steps=cfg.total_steps,
        eval_interval=cfg.eval_interval, curve=curve,
        expert_target=spec.target_return, baseline_floor=spec.floor_return,
        wall_clock_s=time.perf_counter() - t0,
    )
    return TrainOutput(summary=summary, nets={"actor": actor, "critic": critic})
