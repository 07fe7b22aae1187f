"""Run-level helpers shared by the training algorithms."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List

import numpy as np

from . import rngstream
from .envs import make_env
from .metrics import RunSummary


@dataclass
class TrainOutput:
    """Summary plus the trained networks, keyed by role (actor, critic, ...)."""

    summary: RunSummary
    nets: Dict[str, object] = field(default_factory=dict)


def evaluate_policy(env_name: str, seed: int, eval_index: int,
                    act_batch: Callable[[np.ndarray], np.ndarray],
                    episodes: int) -> List[float]:
    """Deterministic evaluation: ``episodes`` fresh episodes stepped in lockstep.

    Each episode gets its own reset substream indexed by (eval_index, episode),
    so evaluation is reproducible and independent of the training env state.
    ``act_batch`` maps a (B, obs_dim) array to one action per row.
    """
    envs = [
        make_env(env_name, seed, reset_stream=rngstream.EVAL,
                 reset_offset=eval_index * episodes + i)
        for i in range(episodes)
    ]
    obs = np.stack([e.reset() for e in envs])
    returns = np.zeros(episodes)
    active = np.ones(episodes, dtype=bool)
    while active.any():
        actions = act_batch(obs)
        for i in np.flatnonzero(active):
            tr = envs[i].step(actions[i])
            returns[i] += tr.reward
            obs[i] = tr.next_state
            if tr.done:
                active[i] = False
    return [float(r) for r in returns]
