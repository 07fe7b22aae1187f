"""Offline learner: expectile value regression, Q-learning against the value
net, and advantage-weighted policy extraction — plus local dataset generation.

The extracted policy is a diagonal Gaussian over raw actions whose mean is
the actor network and whose log-std is a separate state-independent learned
vector; bounds are enforced by clipping at evaluation time only.  (A
tanh-squashed policy cannot track bound-saturated expert actions — the
inverse-squash targets diverge — and a state-dependent std amplifies
regression noise quadratically as it shrinks, stalling the mean fit.)

Training touches only a fixed dataset; the package-wide environment
interaction counter is snapshotted around the gradient loop and recorded so
callers can assert that no interaction occurred.  Final performance is a
single deterministic-policy evaluation, normalized against random-policy and
expert-policy anchors stored in the dataset metadata.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np

from . import envs, rngstream, tanhgauss
from .envs import env_spec, make_env, rollout_episode
from .errors import TrainingFault
from .metrics import EvalRecord, summarize_run
from .networks import build_network, network_from_meta
from .optim import AdamConfig, ParamStore, adam_step, soft_update
from .runner import TrainOutput, evaluate_policy

ANCHOR_EPISODES = 20


@dataclass(frozen=True)
class IqlConfig:
    iterations: int = 20_000
    batch: int = 256
    gamma: float = 0.99
    expectile: float = 0.7
    beta: float = 3.0
    tau: float = 0.005
    adv_weight_clip: float = 100.0
    lr: float = 3e-4
    eval_episodes: int = 100

    def __post_init__(self):
        if not 0 < self.expectile < 1:
            raise ValueError("expectile must lie in (0, 1)")
        if not self.beta > 0:
            raise ValueError("beta must be positive")


def expectile_loss(u, tau_exp: float):
    """Asymmetric squared loss |tau - 1(u < 0)| * u^2, elementwise."""
    u = np.asarray(u, dtype=np.float64)
    weight = np.where(u < 0.0, 1.0 - tau_exp, tau_exp)
    out = weight * u * u
    return float(out) if out.ndim == 0 else out


@dataclass
class OfflineDataset:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray
    meta: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        n = self.states.shape[0]
        for name in ("actions", "rewards", "next_states", "dones"):
            if getattr(self, name).shape[0] != n:
                raise ValueError(f"dataset array {name} length mismatch")
        if not np.all(np.isfinite(self.rewards)):
            raise ValueError("dataset rewards must be finite")

    def __len__(self):
        return self.states.shape[0]

    def sample(self, rng: np.random.Generator, batch: int) -> Dict[str, np.ndarray]:
        idx = rng.integers(0, len(self), size=batch)
        return {
            "obs": self.states[idx],
            "actions": self.actions[idx],
            "rewards": self.rewards[idx],
            "next_obs": self.next_states[idx],
            "dones": self.dones[idx],
        }


def scripted_pendulum_policy(obs: np.ndarray) -> np.ndarray:
    """Energy-pumping swing-up blended smoothly into a PD hold near the top.

    Everything is built from tanh/sigmoid gates rather than hard switches, so
    the controller is a Lipschitz function of the observation — important for
    behavior policies that function approximators will later have to imitate.
    """
    cos_t, sin_t, theta_dot = obs
    theta = np.arctan2(sin_t, cos_t)
    # rod pendulum about its end: I = m l^2 / 3, V = m g (l/2) cos(theta)
    energy = 0.5 * (1.0 / 3.0) * theta_dot**2 + 5.0 * cos_t
    pump = 5.0 - energy
    u_swing = 2.0 * np.tanh(1.2 * pump * theta_dot)
    u_hold = -12.0 * theta - 2.2 * theta_dot
    gate = 1.0 / (1.0 + np.exp(-12.0 * (cos_t - 0.88)))
    gate *= 1.0 / (1.0 + np.exp(-4.0 * (3.5 - abs(theta_dot))))
    u = gate * u_hold + (1.0 - gate) * u_swing
    return np.array([np.clip(u, -2.0, 2.0)])


def _behavior_policy(env_name: str, source: str, noise: float, seed: int):
    """Build the behavior policy callable for dataset generation."""
    spec = env_spec(env_name)
    noise_rng = rngstream.stream(seed, rngstream.DATASET)
    low, high = spec.action_low, spec.action_high

    if source == "random":
        def policy(obs):
            return noise_rng.uniform(low, high)
        return policy

    if source == "scripted":
        if env_name != "pendulum":
            raise ValueError("scripted behavior policy only available for pendulum")
        base = scripted_pendulum_policy
    else:
        from .fileio import read_checkpoint  # deferred: fileio imports this module

        meta, arrays = read_checkpoint(source)
        net = network_from_meta(meta["network"], arrays)
        scale = high.astype(np.float64)

        if meta.get("algo") == "iql":  # iql actors emit raw-action means
            def base(obs):
                return np.clip(net.forward(obs), low, high)
        else:
            def base(obs):
                mu, _ = tanhgauss.split_head(net.forward(obs))
                return tanhgauss.mean_action(mu, scale)

    def policy(obs):
        a = base(obs)
        if noise > 0.0:
            a = a + noise_rng.normal(size=a.shape) * noise
        return np.clip(a, low, high)

    return policy


def generate_dataset(env_name: str, source: str, size: int, noise: float,
                     seed: int, tag: str,
                     expert_anchor: Optional[float] = None) -> OfflineDataset:
    """Roll out a behavior policy and package the transitions.

    ``source`` is "random", "scripted", or a checkpoint path.  Metadata
    records the behavior policy's mean return over the complete episodes seen
    during collection and a locally measured uniform-random anchor; the expert
    anchor defaults to the behavior return when ``tag`` is "expert".
    """
    if size < 1:
        raise ValueError("dataset size must be positive")
    spec = env_spec(env_name)
    if spec.discrete:
        raise ValueError("offline datasets are defined for continuous-action tasks")
    policy = _behavior_policy(env_name, source, noise, seed)

    env = make_env(env_name, seed)
    states = np.zeros((size, spec.obs_dim))
    actions = np.zeros((size, spec.action_dim))
    rewards = np.zeros(size)
    next_states = np.zeros((size, spec.obs_dim))
    dones = np.zeros(size)

    episode_returns = []
    i = 0
    while i < size:
        obs = env.reset()
        ep_ret = 0.0
        while True:
            a = policy(obs)
            tr = env.step(a)
            states[i] = tr.state
            actions[i] = a
            rewards[i] = tr.reward
            next_states[i] = tr.next_state
            dones[i] = float(tr.terminated)
            ep_ret += tr.reward
            obs = tr.next_state
            i += 1
            if tr.done:
                episode_returns.append(ep_ret)
                break
            if i >= size:
                break

    anchor_env = make_env(env_name, seed, reset_stream=rngstream.ANCHOR_INIT)
    anchor_rng = rngstream.stream(seed, rngstream.ANCHOR_ACTION)
    low, high = spec.action_low, spec.action_high
    anchor_returns = [
        rollout_episode(anchor_env, lambda _obs: anchor_rng.uniform(low, high))[1]
        for _ in range(ANCHOR_EPISODES)
    ]

    behavior_return = float(np.mean(episode_returns)) if episode_returns else float("nan")
    if expert_anchor is None and tag == "expert":
        expert_anchor = behavior_return
    meta = {
        "env": env_name,
        "tag": tag,
        "size": size,
        "obs_dim": spec.obs_dim,
        "action_dim": spec.action_dim,
        "noise": noise,
        "seed": seed,
        "source": source if source in ("random", "scripted") else "checkpoint",
        "behavior_return": behavior_return,
        "random_anchor": float(np.mean(anchor_returns)),
        "expert_anchor": expert_anchor,
    }
    return OfflineDataset(states, actions, rewards, next_states, dones, meta)


def iql_update(value_net, critics: Sequence, targets: Sequence, actor,
               log_std_store: ParamStore, batch: Dict[str, np.ndarray],
               cfg: IqlConfig) -> Dict[str, float]:
    """One offline update of the value net, both critics, and the policy."""
    b = batch["obs"].shape[0]
    obs, acts = batch["obs"], batch["actions"]
    x = np.concatenate([obs, acts], axis=1)

    q1t = targets[0].forward(x)[:, 0]
    q2t = targets[1].forward(x)[:, 0]
    qmin = np.minimum(q1t, q2t)

    # expectile regression of V toward min of target critics
    v, cache_v = value_net.forward(obs, need_cache=True)
    u = qmin - v[:, 0]
    weight = np.where(u < 0.0, 1.0 - cfg.expectile, cfg.expectile)
    v_loss = float(np.mean(weight * u * u))
    value_net.backward(cache_v, (-2.0 * weight * u / b)[:, None])
    adam_step(value_net.store, AdamConfig(lr=cfg.lr))

    # critics regress onto r + gamma (1 - done) V(s'), V after its update
    v_next = value_net.forward(batch["next_obs"])[:, 0]
    yq = batch["rewards"] + cfg.gamma * (1.0 - batch["dones"]) * v_next
    if not np.all(np.isfinite(yq)):
        raise TrainingFault("non-finite Q target", entry="q_target")
    q_losses = []
    for critic in critics:
        q, cache = critic.forward(x, need_cache=True)
        resid = q[:, 0] - yq
        critic.backward(cache, (2.0 * resid / b)[:, None])
        adam_step(critic.store, AdamConfig(lr=cfg.lr))
        q_losses.append(float(np.mean(resid * resid)))

    # advantage-weighted log-likelihood of the dataset actions under the
    # unsquashed Gaussian policy (bounds are enforced only at evaluation)
    adv_weight = np.exp(np.minimum(cfg.beta * u, np.log(cfg.adv_weight_clip)))
    mu, cache_a = actor.forward(obs, need_cache=True)
    log_std, clamp_mask = tanhgauss.clamp_log_std(log_std_store.value("log_std"))
    sigma = np.exp(log_std)
    z = (acts - mu) / sigma
    logp = np.sum(-0.5 * z * z - log_std - 0.5 * np.log(2.0 * np.pi), axis=-1)
    pi_loss = float(np.mean(-adv_weight * logp))

    coef = (-adv_weight / b)[:, None]
    actor.backward(cache_a, coef * (z / sigma))
    adam_step(actor.store, AdamConfig(lr=cfg.lr))
    log_std_store.grad("log_std")[...] += (coef * (z * z - 1.0)).sum(axis=0) * clamp_mask
    adam_step(log_std_store, AdamConfig(lr=cfg.lr))

    for t, c in zip(targets, critics):
        soft_update(t.store, c.store, cfg.tau)

    return {
        "v_loss": v_loss,
        "q1_loss": q_losses[0],
        "q2_loss": q_losses[1],
        "pi_loss": pi_loss,
        "mean_weight": float(adv_weight.mean()),
    }


def iql_train(dataset: OfflineDataset, net_kind: str, arch: Dict, cfg: IqlConfig,
              seed: int, fingerprint: str = "") -> TrainOutput:
    """Offline training followed by one deterministic evaluation.

    Records the number of environment interactions observed during the
    gradient phase (must be zero) and the anchor-normalized final score.
    """
    t0 = time.perf_counter()
    env_name = str(dataset.meta["env"])
    spec = env_spec(env_name)
    act_dim = spec.action_dim
    action_scale = spec.action_high.astype(np.float64)

    arch = dict(arch)
    arch.setdefault("activation", "relu")
    value_net = build_network(net_kind, spec.obs_dim, 1, arch,
                              rngstream.stream(seed, rngstream.NET_VALUE))
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
    actor = build_network(net_kind, spec.obs_dim, act_dim, arch,
                          rngstream.stream(seed, rngstream.NET_ACTOR))
    log_std_store = ParamStore()
    log_std_store.add("log_std", np.zeros(act_dim))

    batch_rng = rngstream.stream(seed, rngstream.REPLAY)
    interactions_before = envs.interaction_count()
    for _ in range(cfg.iterations):
        batch = dataset.sample(batch_rng, cfg.batch)
        try:
            iql_update(value_net, critics, targets, actor, log_std_store, batch, cfg)
        except TrainingFault as fault:
            fault.seed = seed
            raise
    train_interactions = envs.interaction_count() - interactions_before

    def act(obs_batch):
        return np.clip(actor.forward(obs_batch), spec.action_low, spec.action_high)

    returns = evaluate_policy(env_name, seed, 0, act, cfg.eval_episodes)
    score = float(np.mean(returns))

    normalized = None
    random_anchor = dataset.meta.get("random_anchor")
    expert_anchor = dataset.meta.get("expert_anchor")
    if random_anchor is not None and expert_anchor is not None:
        denom = float(expert_anchor) - float(random_anchor)
        if denom != 0.0:
            normalized = (score - float(random_anchor)) / denom

    steps = max(cfg.iterations, 1)
    curve = [EvalRecord(step=steps, returns=returns)]
    summary = summarize_run(
        seed=seed, env_name=env_name, algo="iql", net=net_kind,
        fingerprint=fingerprint, total_steps=steps, eval_interval=steps,
        curve=curve, expert_target=spec.target_return,
        baseline_floor=spec.floor_return, wall_clock_s=time.perf_counter() - t0,
        metadata={
            "train_interactions": int(train_interactions),
            "final_score": score,
            "normalized_score": normalized,
            "dataset_tag": dataset.meta.get("tag"),
            "dataset_size": len(dataset),
        },
    )
    return TrainOutput(
        summary=summary,
        nets={"actor": actor, "critic1": critics[0], "critic2": critics[1],
              "value": value_net},
    )
