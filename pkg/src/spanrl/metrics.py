"""Benchmark metrics: sustained solving, threshold targets, anytime tables.

Two metric families summarize a training run:

* sample efficiency — the earliest step at which the mean return over an
  evaluation batch stays at or above a target for five consecutive
  evaluations ("sustained solving"), reported per threshold fraction of the
  expert score with a success rate across seeds;
* anytime performance — evaluation statistics at fixed fractions of the
  training budget.

Thresholds for positive-return tasks are plain fractions of the expert
target.  Negative-return tasks interpolate piecewise-linearly from a
worst-case floor through the half-threshold anchor (twice the target, e.g.
-200 for an expert score of -100) up to the target itself.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

THRESHOLD_PERCENTS = (25, 50, 75, 95, 100)
CHECKPOINT_PERCENTS = (10, 25, 50, 75, 95, 100)
SUSTAIN_WINDOW = 5


@dataclass
class EvalRecord:
    """Evaluation statistics at one global step."""

    step: int
    returns: List[float]

    @property
    def mean(self) -> float:
        return float(np.mean(self.returns))

    @property
    def std(self) -> float:
        return float(np.std(self.returns))  # population std over episodes


@dataclass
class RunSummary:
    """Per-seed training outcome."""

    seed: int
    env: str
    algo: str
    net: str
    fingerprint: str
    total_steps: int
    eval_interval: int
    curve: List[EvalRecord]
    solve_steps: Dict[int, Optional[int]]
    checkpoints: Dict[int, Tuple[float, float]]
    wall_clock_s: float
    metadata: Dict[str, object] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "schema": "spanrl-summary-v1",
            "seed": self.seed,
            "env": self.env,
            "algo": self.algo,
            "net": self.net,
            "fingerprint": self.fingerprint,
            "total_steps": self.total_steps,
            "eval_interval": self.eval_interval,
            "curve": [
                {"step": r.step, "mean": r.mean, "std": r.std, "returns": list(map(float, r.returns))}
                for r in self.curve
            ],
            "solve_steps": {str(k): v for k, v in self.solve_steps.items()},
            "checkpoints": {str(k): list(v) for k, v in self.checkpoints.items()},
            "wall_clock_s": self.wall_clock_s,
            "metadata": self.metadata,
        }

    @staticmethod
    def from_json_dict(d: dict) -> "RunSummary":
        if d.get("schema") != "spanrl-summary-v1":
            raise ValueError(f"unsupported summary schema: {d.get('schema')!r}")
        return RunSummary(
            seed=d["seed"],
            env=d["env"],
            algo=d["algo"],
            net=d["net"],
            fingerprint=d["fingerprint"],
            total_steps=d["total_steps"],
            eval_interval=d["eval_interval"],
            curve=[EvalRecord(step=r["step"], returns=list(r["returns"])) for r in d["curve"]],
            solve_steps={int(k): v for k, v in d["solve_steps"].items()},
            checkpoints={int(k): tuple(v) for k, v in d["checkpoints"].items()},
            wall_clock_s=d["wall_clock_s"],
            metadata=d.get("metadata", {}),
        )


def sustained_solve_step(curve: Sequence[EvalRecord], target: float,
                         window: int = SUSTAIN_WINDOW) -> Optional[int]:
    """Step of the first record opening ``window`` consecutive means >= target."""
    run = 0
    start_idx = 0
    for i, rec in enumerate(curve):
        if rec.mean >= target:
            if run == 0:
                start_idx = i
            run += 1
            if run >= window:
                return curve[start_idx].step
        else:
            run = 0
    return None


def threshold_targets(expert_target: float, baseline_floor: float) -> Dict[int, float]:
    """Absolute return required at each threshold percentage.

    Positive targets scale multiplicatively.  Negative targets interpolate
    piecewise-linearly through (0%, floor), (50%, 2 * target), (100%, target),
    which places the half threshold at twice the solved score.
    """
    out = {}
    for pct in THRESHOLD_PERCENTS:
        f = pct / 100.0
        if expert_target > 0:
            out[pct] = f * expert_target
        else:
            anchor = 2.0 * expert_target
            if f <= 0.5:
                out[pct] = baseline_floor + (anchor - baseline_floor) * (f / 0.5)
            else:
                out[pct] = anchor + (expert_target - anchor) * ((f - 0.5) / 0.5)
    return out


def aggregate(runs: Sequence[RunSummary], threshold_pct: int) -> Tuple[Optional[float], float]:
    """(median solve step over solving seeds, success rate) at one threshold."""
    if not runs:
        raise ValueError("aggregate requires at least one run")
    steps = [r.solve_steps.get(threshold_pct) for r in runs]
    solved = [s for s in steps if s is not None]
    rate = len(solved) / len(steps)
    if not solved:
        return None, 0.0
    return float(np.median(solved)), rate


def anytime_table(runs: Sequence[RunSummary], budget: int) -> Dict[int, Tuple[float, float]]:
    """Mean of per-seed eval means and population std across seeds per checkpoint."""
    if not runs:
        raise ValueError("anytime_table requires at least one run")
    out = {}
    for pct in CHECKPOINT_PERCENTS:
        step = budget * pct / 100.0
        per_seed = []
        for run in runs:
            eligible = [r for r in run.curve if r.step <= step]
            if not eligible:
                continue
            per_seed.append(eligible[-1].mean)
        if per_seed:
            out[pct] = (float(np.mean(per_seed)), float(np.std(per_seed)))
        else:
            out[pct] = (float("nan"), float("nan"))
    return out


def checkpoint_scores(curve: Sequence[EvalRecord], budget: int) -> Dict[int, Tuple[float, float]]:
    """Single-seed anytime scores: (mean, std) of the record nearest <= each checkpoint."""
    out = {}
    for pct in CHECKPOINT_PERCENTS:
        step = budget * pct / 100.0
        eligible = [r for r in curve if r.step <= step]
        if eligible:
            out[pct] = (eligible[-1].mean, eligible[-1].std)
        else:
            out[pct] = (float("nan"), float("nan"))
    return out


def summarize_run(seed: int, env_name: str, algo: str, net: str, fingerprint: str,
                  total_steps: int, eval_interval: int, curve: List[EvalRecord],
                  expert_target: float, baseline_floor: float, wall_clock_s: float,
                  metadata: Optional[dict] = None) -> RunSummary:
    """Assemble a RunSummary: solve steps at every threshold plus checkpoint scores."""
    targets = threshold_targets(expert_target, baseline_floor)
    solve = {pct: sustained_solve_step(curve, tgt) for pct, tgt in targets.items()}
    return RunSummary(
        seed=seed,
        env=env_name,
        algo=algo,
        net=net,
        fingerprint=fingerprint,
        total_steps=total_steps,
        eval_interval=eval_interval,
        curve=curve,
        solve_steps=solve,
        checkpoints=checkpoint_scores(curve, total_steps),
        wall_clock_s=wall_clock_s,
        metadata=metadata or {},
    )
