"""Off-policy maximum-entropy actor-critic for continuous control.

Twin state-action critics regress onto a soft target built from the minimum of
two slowly tracking target networks; the tanh-squashed Gaussian actor is
updated pathwise, with gradients flowing through the critics' input-gradient
channel; the entropy temperature adapts so the policy's expected log-density
tracks a target entropy of ``-scale * action_dim``.

One gradient update per environment step, after a uniform-random warmup that
seeds the replay buffer.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Dict, Sequence

import numpy as np

from . import rngstream, tanhgauss
from .envs import env_spec, make_env
from .errors import TrainingFault
from .metrics import EvalRecord, summarize_run
from .networks import build_network
from .optim import AdamConfig, ParamStore, adam_step, soft_update
from .runner import TrainOutput, evaluate_policy


@dataclass(frozen=True)
class SacConfig:
    batch: int = 128
    buffer_capacity: int = 1_000_000
    warmup_steps: int = 1000
    tau: float = 0.005
    gamma: float = 0.99
    lr: float = 3e-4
    target_entropy_scale: float = 1.0
    max_grad_norm: float = 10.0
    total_steps: int = 100_000
    eval_interval: int = 5000
    eval_episodes: int = 30

    def __post_init__(self):
        if not 0 < self.tau <= 1:
            raise ValueError("tau must lie in (0, 1]")
        if self.buffer_capacity < self.batch:
            raise ValueError("buffer capacity must be >= batch size")


class ReplayBuffer:
    """Uniform-sampling ring buffer of transitions."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.actions = np.zeros((capacity, act_dim))
        self.rewards = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.dones = np.zeros(capacity)
        self.cursor = 0
        self.size = 0

    def __len__(self):
        return self.size

    def add(self, obs, action, reward, next_obs, done):
        i = self.cursor
        self.obs[i] = obs
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_obs[i] = next_obs
        self.dones[i] = float(done)
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, batch: int) -> Dict[str, np.ndarray]:
        idx = rng.integers(0, self.size, size=batch)
        return {
            "obs": self.obs[idx],
            "actions": self.actions[idx],
            "rewards": self.rewards[idx],
            "next_obs": self.next_obs[idx],
            "dones": self.dones[idx],
        }


def actor_sample(actor, obs, rng: np.random.Generator, action_scale):
    """Draw one squashed-Gaussian action and its log-density for a single state."""
    out = actor.forward(obs)
    mu, raw = tanhgauss.split_head(out)
    log_std, _ = tanhgauss.clamp_log_std(raw)
    eps = rng.normal(size=mu.shape)
    action, logp, _, _ = tanhgauss.sample(mu, log_std, eps, action_scale)
    return action, float(logp)


def _policy_batch(actor, obs, eps, action_scale):
    out = actor.forward(obs)
    mu, raw = tanhgauss.split_head(out)
    log_std, _ = tanhgauss.clamp_log_std(raw)
    action, logp, _, _ = tanhgauss.sample(mu, log_std, eps, action_scale)
    return action, logp


def critic_update(critics: Sequence, targets: Sequence, actor, log_alpha: float,
                  batch: Dict[str, np.ndarray], cfg: SacConfig,
                  noise_rng: np.random.Generator, action_scale) -> Dict[str, float]:
    """Regress both critics onto the shared entropy-regularized soft target."""
    alpha = float(np.exp(log_alpha))
    b = batch["obs"].shape[0]

    eps = noise_rng.normal(size=batch["actions"].shape)
    next_a, next_logp = _policy_batch(actor, batch["next_obs"], eps, action_scale)
    xnext = np.concatenate([batch["next_obs"], next_a], axis=1)
    q1t = targets[0].forward(xnext)[:, 0]
    q2t = targets[1].forward(xnext)[:, 0]
    y = batch["rewards"] + cfg.gamma * (1.0 - batch["dones"]) * (
        np.minimum(q1t, q2t) - alpha * next_logp
    )
    if not np.all(np.isfinite(y)):
        raise TrainingFault("non-finite critic target", entry="critic_target")

    x = np.concatenate([batch["obs"], batch["actions"]], axis=1)
    adam = AdamConfig(lr=cfg.lr, max_grad_norm=cfg.max_grad_norm)
    losses = []
    for critic in critics:
        q, cache = critic.forward(x, need_cache=True)
        resid = q[:, 0] - y
        critic.backward(cache, (2.0 * resid / b)[:, None])
        adam_step(critic.store, adam)
        losses.append(float(np.mean(resid * resid)))
    return {"q1_loss": losses[0], "q2_loss": losses[1], "target_mean": float(y.mean())}


def actor_loss_and_grad(actor, critics: Sequence, alpha: float,
                        obs: np.ndarray, eps: np.ndarray, action_scale,
                        accumulate: bool = True):
    """Loss mean(alpha * log pi(a~|s) - min_i Q_i(s, a~)) and its actor gradient.

    Actions are reparameterized with the supplied noise, so the same noise
    makes this a deterministic function of the actor parameters (which is what
    the finite-difference check exploits).  Critic parameters stay frozen:
    their backward runs with param_grads=False purely to obtain dQ/da.
    Returns (loss, logp); gradients accumulate into the actor's store unless
    ``accumulate`` is false.
    """
    b = obs.shape[0]
    out, cache_a = actor.forward(obs, need_cache=True)
    mu, raw = tanhgauss.split_head(out)
    log_std, clamp_mask = tanhgauss.clamp_log_std(raw)
    sigma = np.exp(log_std)
    action, logp, _, y = tanhgauss.sample(mu, log_std, eps, action_scale)

    x = np.concatenate([obs, action], axis=1)
    q1, c1 = critics[0].forward(x, need_cache=True)
    q2, c2 = critics[1].forward(x, need_cache=True)
    qmin = np.minimum(q1[:, 0], q2[:, 0])
    pick1 = (q1[:, 0] <= q2[:, 0]).astype(np.float64)

    loss = float(np.mean(alpha * logp - qmin))
    if not np.isfinite(loss):
        raise TrainingFault("non-finite actor loss", entry="actor")
    if not accumulate:
        return loss, logp

    # dQmin/d(state-action input), taken through whichever critic is the min
    d1 = critics[0].backward(c1, (-pick1 / b)[:, None], input_grad=True, param_grads=False)
    d2 = critics[1].backward(c2, (-(1.0 - pick1) / b)[:, None], input_grad=True, param_grads=False)
    dq_da = (d1 + d2)[:, obs.shape[1]:]  # action columns only

    # chain a = scale * tanh(u), u = mu + sigma * eps
    du_from_q = dq_da * action_scale * (1.0 - y * y)
    g_corr = tanhgauss.squash_correction_grad(y)  # d(-log(1 - tanh^2 + eps))/du
    du_total = (alpha / b) * g_corr + du_from_q
    dmu = du_total
    dls = (alpha / b) * (-1.0) + du_total * sigma * eps
    actor.backward(cache_a, np.concatenate([dmu, dls * clamp_mask], axis=1))
    return loss, logp


def actor_and_alpha_update(actor, critics: Sequence, alpha_store: ParamStore,
                           batch: Dict[str, np.ndarray], cfg: SacConfig,
                           noise_rng: np.random.Generator, action_scale,
                           target_entropy: float) -> Dict[str, float]:
    """Pathwise actor update through the critics, then the temperature step."""
    alpha = float(np.exp(alpha_store.value("log_alpha")[0]))
    obs = batch["obs"]
    b, act_dim = batch["actions"].shape

    eps = noise_rng.normal(size=(b, act_dim))
    loss, logp = actor_loss_and_grad(actor, critics, alpha, obs, eps, action_scale)
    adam_step(actor.store, AdamConfig(lr=cfg.lr, max_grad_norm=cfg.max_grad_norm))

    # temperature: d/d(log alpha) of mean(-log_alpha * (logp + target)) — logp detached
    alpha_store.grad("log_alpha")[...] += -np.mean(logp + target_entropy)
    adam_step(alpha_store, AdamConfig(lr=cfg.lr))

    return {
        "actor_loss": loss,
        "alpha": alpha,
        "policy_logp": float(np.mean(logp)),
    }


def _mean_action_batch(actor, action_scale):
    def act(obs_batch: np.ndarray) -> np.ndarray:
        out = actor.forward(obs_batch)
        mu, _ = tanhgauss.split_head(out)
        return tanhgauss.mean_action(mu, action_scale)

    return act


def sac_train(env_name: str, net_kind: str, arch: Dict, cfg: SacConfig, seed: int,
              fingerprint: str = "") -> TrainOutput:
    """Train on one seed; evaluation uses the deterministic mean action."""
    t0 = time.perf_counter()
    spec = env_spec(env_name)
    if spec.discrete:
        raise ValueError(f"{env_name} does not have a continuous action space")
    if not np.allclose(spec.action_low, -spec.action_high):
        raise ValueError("tanh squashing assumes symmetric action bounds")
    act_dim = spec.action_dim
    action_scale = spec.action_high.astype(np.float64)
    target_entropy = -cfg.target_entropy_scale * act_dim

    arch = dict(arch)
    arch.setdefault("activation", "relu")
    actor = build_network(net_kind, spec.obs_dim, 2 * act_dim, arch,
                          rngstream.stream(seed, rngstream.NET_ACTOR))
    critics = [
        build_network(net_kind, spec.obs_dim + act_dim, 1, arch,
                      rngstream.stream(seed, rngstream.NET_CRITIC)),
        build_network(net_kind, spec.obs_dim + act_dim, 1, arch,
                      rngstream.stream(seed, rngstream.NET_CRITIC2)),
    ]
    targets = [
        build_network(net_kind, spec.obs_dim + act_dim, 1, arch,
                      rngstream.stream(seed, rngstream.NET_CRITIC)),
        build_network(net_kind, spec.obs_dim + act_dim, 1, arch,
                      rngstream.stream(seed, rngstream.NET_CRITIC2)),
    ]
    for t, c in zip(targets, critics):
        t.store.copy_values_from(c.store)

    alpha_store = ParamStore()
    alpha_store.add("log_alpha", np.zeros(1))

    capacity = max(cfg.batch, min(cfg.buffer_capacity, max(cfg.total_steps, 1)))
    buffer = ReplayBuffer(capacity, spec.obs_dim, act_dim)
    env = make_env(env_name, seed)
    warmup_rng = rngstream.stream(seed, rngstream.WARMUP)
    action_rng = rngstream.stream(seed, rngstream.ACTION)
    noise_rng = rngstream.stream(seed, rngstream.NOISE)
    replay_rng = rngstream.stream(seed, rngstream.REPLAY)

    curve = []
    obs = env.reset()
    global_step = 0
    next_eval = cfg.eval_interval
    eval_index = 0
    updates = 0

    while global_step < cfg.total_steps:
        if global_step < cfg.warmup_steps:
            action = warmup_rng.uniform(spec.action_low, spec.action_high)
        else:
            action, _ = actor_sample(actor, obs, action_rng, action_scale)
        tr = env.step(action)
        buffer.add(obs, action, tr.reward, tr.next_state, tr.terminated)
        obs = tr.next_state if not tr.done else env.reset()
        global_step += 1

        if global_step > cfg.warmup_steps and len(buffer) >= cfg.batch:
            batch = buffer.sample(replay_rng, cfg.batch)
            try:
                critic_update(critics, targets, actor,
                              float(alpha_store.value("log_alpha")[0]), batch, cfg,
                              noise_rng, action_scale)
                actor_and_alpha_update(actor, critics, alpha_store, batch, cfg,
                                       noise_rng, action_scale, target_entropy)
            except TrainingFault as fault:
                fault.seed = seed
                raise
            for t, c in zip(targets, critics):
                soft_update(t.store, c.store, cfg.tau)
            updates += 1

        while next_eval <= global_step:
            returns = evaluate_policy(env_name, seed, eval_index,
                                      _mean_action_batch(actor, action_scale),
                                      cfg.eval_episodes)
            curve.append(EvalRecord(step=next_eval, returns=returns))
            next_eval += cfg.eval_interval
            eval_index += 1

    summary = summarize_run(
        seed=seed, env_name=env_name, algo="sac", net=net_kind,
        fingerprint=fingerprint, total_steps=cfg.total_steps,
        eval_interval=cfg.eval_interval, curve=curve,
        expert_target=spec.target_return, baseline_floor=spec.floor_return,
        wall_clock_s=time.perf_counter() - t0,
        metadata={"updates": updates, "warmup_steps": cfg.warmup_steps},
    )
    return TrainOutput(
        summary=summary,
        nets={"actor": actor, "critic1": critics[0], "critic2": critics[1]},
    )
