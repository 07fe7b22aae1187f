"""Self-contained classic-control environments: CartPole, Acrobot, Pendulum.

Physics constants, initial-state distributions, and termination thresholds
match the public reference definitions of CartPole-v1, Acrobot-v1, and
Pendulum-v1, so published solved criteria stay meaningful.  All dynamics are
deterministic; the only randomness is the initial state, drawn from a
counter-based substream so that (seed, reset index) fixes the state bit for
bit regardless of how many steps ran in between.

A module-level interaction counter tallies every step taken in the process;
offline training asserts it does not move.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from . import rngstream
from .errors import ActionError, ProtocolError

_INTERACTIONS = 0


def interaction_count() -> int:
    """Total environment steps taken in this process."""
    return _INTERACTIONS


@dataclass(frozen=True)
class EnvSpec:
    name: str
    obs_dim: int
    n_actions: Optional[int]          # None for continuous action spaces
    action_low: Optional[np.ndarray]
    action_high: Optional[np.ndarray]
    horizon: int
    target_return: float              # expert-level score (100% threshold)
    floor_return: float               # worst-case anchor for negative-return envs

    @property
    def discrete(self) -> bool:
        return self.n_actions is not None

    @property
    def action_dim(self) -> int:
        return 1 if self.discrete else self.action_low.shape[0]


@dataclass
class Transition:
    state: np.ndarray
    action: object
    reward: float
    next_state: np.ndarray
    terminated: bool
    truncated: bool

    @property
    def done(self) -> bool:
        return self.terminated or self.truncated


class _EpisodicEnv:
    """Shared reset/step bookkeeping; subclasses implement the physics."""

    spec: EnvSpec

    def __init__(self, seed: int, reset_stream: int = rngstream.ENV_INIT,
                 reset_offset: int = 0):
        self._seed = seed
        self._reset_stream = reset_stream
        self._reset_offset = reset_offset
        self._reset_count = 0
        self._steps = 0
        self._done = True
        self._state = None
        self._obs = None

    def reset(self) -> np.ndarray:
        rng = rngstream.substream(self._seed, self._reset_stream,
                                  self._reset_offset + self._reset_count)
        self._reset_count += 1
        self._steps = 0
        self._done = False
        self._state = self._sample_initial(rng)
        self._obs = self._observe(self._state)
        return self._obs

    def step(self, action) -> Transition:
        global _INTERACTIONS
        if self._done:
            raise ProtocolError("step() after episode end; call reset()")
        self._validate_action(action)
        obs_before = self._obs
        next_state, reward, terminated = self._dynamics(self._state, action)
        self._state = next_state
        self._obs = self._observe(next_state)
        self._steps += 1
        _INTERACTIONS += 1
        truncated = (not terminated) and self._steps >= self.spec.horizon
        self._done = terminated or truncated
        return Transition(
            state=obs_before,
            action=action,
            reward=float(reward),
            next_state=self._obs,
            terminated=terminated,
            truncated=truncated,
        )

    # subclass hooks -------------------------------------------------------
    def _sample_initial(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def _dynamics(self, state, action) -> Tuple[np.ndarray, float, bool]:
        raise NotImplementedError

    def _observe(self, state: np.ndarray) -> np.ndarray:
        return state.copy()

    def _validate_action(self, action):
        spec = self.spec
        if spec.discrete:
            try:
                a = int(action)
            except (TypeError, ValueError):
                raise ActionError(f"discrete action must be an integer scalar, got {action!r}") from None
            if a != action:
                raise ActionError(f"discrete action must be integral, got {action!r}")
            if not 0 <= a < spec.n_actions:
                raise ActionError(f"action {a} outside [0, {spec.n_actions})")
        else:
            a = np.asarray(action, dtype=np.float64).reshape(-1)
            if a.shape[0] != spec.action_dim or not np.all(np.isfinite(a)):
                raise ActionError(f"continuous action malformed: {action!r}")


class CartPole(_EpisodicEnv):
    """Pole balancing on a force-actuated cart, Euler-integrated at 50 Hz."""

    GRAVITY = 9.8
    MASS_CART = 1.0
    MASS_POLE = 0.1
    TOTAL_MASS = MASS_CART + MASS_POLE
    LENGTH = 0.5  # half pole length
    POLEMASS_LENGTH = MASS_POLE * LENGTH
    FORCE_MAG = 10.0
    TAU = 0.02
    THETA_LIMIT = 12.0 * 2.0 * np.pi / 360.0
    X_LIMIT = 2.4

    spec = EnvSpec(
        name="cartpole",
        obs_dim=4,
        n_actions=2,
        action_low=None,
        action_high=None,
        horizon=500,
        target_return=500.0,
        floor_return=0.0,
    )

    def _sample_initial(self, rng):
        return rng.uniform(-0.05, 0.05, size=4)

    def _dynamics(self, state, action):
        x, x_dot, theta, theta_dot = state
        force = self.FORCE_MAG if int(action) == 1 else -self.FORCE_MAG
        cos_t = np.cos(theta)
        sin_t = np.sin(theta)

        temp = (force + self.POLEMASS_LENGTH * theta_dot**2 * sin_t) / self.TOTAL_MASS
        theta_acc = (self.GRAVITY * sin_t - cos_t * temp) / (
            self.LENGTH * (4.0 / 3.0 - self.MASS_POLE * cos_t**2 / self.TOTAL_MASS)
        )
        x_acc = temp - self.POLEMASS_LENGTH * theta_acc * cos_t / self.TOTAL_MASS

        x = x + self.TAU * x_dot
        x_dot = x_dot + self.TAU * x_acc
        theta = theta + self.TAU * theta_dot
        theta_dot = theta_dot + self.TAU * theta_acc
        next_state = np.array([x, x_dot, theta, theta_dot])

        terminated = bool(abs(x) > self.X_LIMIT or abs(theta) > self.THETA_LIMIT)
        return next_state, 1.0, terminated


class Acrobot(_EpisodicEnv):
    """Two-link underactuated swing-up; torque on the elbow joint, RK4 at dt=0.2.

    Internal state is (theta1, theta2, dtheta1, dtheta2); observations are
    (cos t1, sin t1, cos t2, sin t2, dt1, dt2).  Reward is -1 per step until
    the free end clears the target height, 0 on the terminal step.
    """

    DT = 0.2
    LINK_LENGTH_1 = 1.0
    LINK_MASS_1 = 1.0
    LINK_MASS_2 = 1.0
    LINK_COM_1 = 0.5
    LINK_COM_2 = 0.5
    LINK_MOI = 1.0
    MAX_VEL_1 = 4.0 * np.pi
    MAX_VEL_2 = 9.0 * np.pi
    TORQUES = (-1.0, 0.0, 1.0)
    G = 9.8

    spec = EnvSpec(
        name="acrobot",
        obs_dim=6,
        n_actions=3,
        action_low=None,
        action_high=None,
        horizon=500,
        target_return=-100.0,
        floor_return=-500.0,
    )

    def _sample_initial(self, rng):
        return rng.uniform(-0.1, 0.1, size=4)

    def _observe(self, state):
        t1, t2, dt1, dt2 = state
        return np.array([np.cos(t1), np.sin(t1), np.cos(t2), np.sin(t2), dt1, dt2])

    def _dsdt(self, s, torque):
        m1, m2 = self.LINK_MASS_1, self.LINK_MASS_2
        l1 = self.LINK_LENGTH_1
        lc1, lc2 = self.LINK_COM_1, self.LINK_COM_2
        i1 = i2 = self.LINK_MOI
        g = self.G
        theta1, theta2, dtheta1, dtheta2 = s

        d1 = m1 * lc1**2 + m2 * (l1**2 + lc2**2 + 2 * l1 * lc2 * np.cos(theta2)) + i1 + i2
        d2 = m2 * (lc2**2 + l1 * lc2 * np.cos(theta2)) + i2
        phi2 = m2 * lc2 * g * np.cos(theta1 + theta2 - np.pi / 2.0)
        phi1 = (
            -m2 * l1 * lc2 * dtheta2**2 * np.sin(theta2)
            - 2 * m2 * l1 * lc2 * dtheta2 * dtheta1 * np.sin(theta2)
            + (m1 * lc1 + m2 * l1) * g * np.cos(theta1 - np.pi / 2.0)
            + phi2
        )
        ddtheta2 = (
            torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1**2 * np.sin(theta2) - phi2
        ) / (m2 * lc2**2 + i2 - d2**2 / d1)
        ddtheta1 = -(d2 * ddtheta2 + phi1) / d1
        return np.array([dtheta1, dtheta2, ddtheta1, ddtheta2])

    @staticmethod
    def _wrap(x, low, high):
        span = high - low
        return ((x - low) % span) + low

    def _dynamics(self, state, action):
        torque = self.TORQUES[int(action)]
        dt = self.DT
        s = state
        k1 = self._dsdt(s, torque)
        k2 = self._dsdt(s + dt / 2.0 * k1, torque)
        k3 = self._dsdt(s + dt / 2.0 * k2, torque)
        k4 = self._dsdt(s + dt * k3, torque)
        ns = s + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

        ns[0] = self._wrap(ns[0], -np.pi, np.pi)
        ns[1] = self._wrap(ns[1], -np.pi, np.pi)
        ns[2] = np.clip(ns[2], -self.MAX_VEL_1, self.MAX_VEL_1)
        ns[3] = np.clip(ns[3], -self.MAX_VEL_2, self.MAX_VEL_2)

        terminated = bool(-np.cos(ns[0]) - np.cos(ns[1] + ns[0]) > 1.0)
        reward = 0.0 if terminated else -1.0
        return ns, reward, terminated


class Pendulum(_EpisodicEnv):
    """Torque-limited swing-up with quadratic state/action cost.

    Semi-implicit Euler at dt=0.05: velocity updates first, then position,
    which keeps the zero-torque mechanical energy free of secular drift.
    """

    MAX_SPEED = 8.0
    MAX_TORQUE = 2.0
    DT = 0.05
    G = 10.0
    M = 1.0
    L = 1.0

    spec = EnvSpec(
        name="pendulum",
        obs_dim=3,
        n_actions=None,
        action_low=np.array([-2.0]),
        action_high=np.array([2.0]),
        horizon=200,
        target_return=-200.0,
        floor_return=-1600.0,
    )

    def _sample_initial(self, rng):
        theta = rng.uniform(-np.pi, np.pi)
        theta_dot = rng.uniform(-1.0, 1.0)
        return np.array([theta, theta_dot])

    def _observe(self, state):
        theta, theta_dot = state
        return np.array([np.cos(theta), np.sin(theta), theta_dot])

    @staticmethod
    def _angle_normalize(x):
        return ((x + np.pi) % (2 * np.pi)) - np.pi

    def _dynamics(self, state, action):
        theta, theta_dot = state
        u = float(np.clip(np.asarray(action, dtype=np.float64).reshape(-1)[0],
                          -self.MAX_TORQUE, self.MAX_TORQUE))
        cost = self._angle_normalize(theta) ** 2 + 0.1 * theta_dot**2 + 0.001 * u**2

        new_theta_dot = theta_dot + (
            3.0 * self.G / (2.0 * self.L) * np.sin(theta) + 3.0 / (self.M * self.L**2) * u
        ) * self.DT
        new_theta_dot = float(np.clip(new_theta_dot, -self.MAX_SPEED, self.MAX_SPEED))
        new_theta = theta + new_theta_dot * self.DT

        return np.array([new_theta, new_theta_dot]), -cost, False

    def mechanical_energy(self) -> float:
        """Kinetic + potential energy of the current internal state."""
        theta, theta_dot = self._state
        inertia = self.M * self.L**2 / 3.0
        return 0.5 * inertia * theta_dot**2 + self.M * self.G * (self.L / 2.0) * np.cos(theta)


_ENVS = {"cartpole": CartPole, "acrobot": Acrobot, "pendulum": Pendulum}


def env_names() -> List[str]:
    return sorted(_ENVS)


def env_spec(name: str) -> EnvSpec:
    try:
        return _ENVS[name].spec
    except KeyError:
        raise KeyError(f"unknown environment {name!r}; known: {env_names()}") from None


def make_env(name: str, seed: int, reset_stream: int = rngstream.ENV_INIT,
             reset_offset: int = 0) -> _EpisodicEnv:
    try:
        cls = _ENVS[name]
    except KeyError:
        raise KeyError(f"unknown environment {name!r}; known: {env_names()}") from None
    return cls(seed, reset_stream=reset_stream, reset_offset=reset_offset)


def rollout_episode(env: _EpisodicEnv, policy, max_steps: Optional[int] = None):
    """Run ``policy`` (obs -> action) from reset to episode end.

    Returns the transition list and the undiscounted return.
    """
    obs = env.reset()
    transitions = []
    total = 0.0
    steps = 0
    while True:
        action = policy(obs)
        tr = env.step(action)
        transitions.append(tr)
        total += tr.reward
        obs = tr.next_state
        steps += 1
        if tr.done or (max_steps is not None and steps >= max_steps):
            return transitions, total
