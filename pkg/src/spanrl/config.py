"""Run configuration: flat key=value sections, defaults, and fingerprints.

Configs are INI-style text (section headers, ``key = value`` lines) chosen so
any language can parse them.  ``[run]`` names the environment, algorithm,
network kind, seeds, and budget; ``[span]`` / ``[mlp]`` hold architecture
fields; ``[ppo]`` / ``[sac]`` / ``[iql]`` override algorithm defaults;
``[sweep]`` lists per-axis values for one-at-a-time ablations; ``[dataset]``
describes offline data generation.

The fingerprint is a short hash over every semantically meaningful field
(excluding seeds and output paths); reports refuse to pool summaries whose
fingerprints disagree.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .envs import env_names, env_spec
from .errors import ConfigError
from .iql import IqlConfig
from .ppo import PpoConfig
from .sac import SacConfig

_ALGOS = ("ppo", "sac", "iql")
_NETS = ("span", "mlp")

_KNOWN_KEYS = {
    "run": {"env", "algo", "net", "seeds", "total_steps", "out"},
    "span": {"nmodes", "nelems", "degree"},
    "mlp": {
        "hidden1", "hidden2",
        "actor_hidden1", "actor_hidden2",
        "critic_hidden1", "critic_hidden2",
        "value_hidden1", "value_hidden2",
    },
    "ppo": {
        "rollout_steps", "minibatch", "epochs", "gamma", "lam", "clip_eps",
        "value_coef", "entropy_coef", "lr", "max_grad_norm", "eval_interval",
        "eval_episodes", "normalize_advantages",
    },
    "sac": {
        "batch", "buffer_capacity", "warmup_steps", "tau", "gamma", "lr",
        "target_entropy_scale", "max_grad_norm", "eval_interval", "eval_episodes",
    },
    "iql": {
        "iterations", "batch", "gamma", "expectile", "beta", "tau",
        "adv_weight_clip", "lr", "eval_episodes", "dataset",
    },
    "sweep": {"nmodes", "nelems", "degree"},
    "dataset": {"source", "checkpoint", "size", "noise", "tag", "seed"},
}

_INT_KEYS = {
    "total_steps", "nmodes", "nelems", "degree", "hidden1", "hidden2",
    "actor_hidden1", "actor_hidden2", "critic_hidden1", "critic_hidden2",
    "value_hidden1", "value_hidden2", "rollout_steps", "minibatch", "epochs",
    "eval_interval", "eval_episodes", "batch", "buffer_capacity",
    "warmup_steps", "iterations", "size", "seed",
}
_FLOAT_KEYS = {
    "gamma", "lam", "clip_eps", "value_coef", "entropy_coef", "lr",
    "max_grad_norm", "tau", "target_entropy_scale", "expectile", "beta",
    "adv_weight_clip", "noise",
}
_BOOL_KEYS = {"normalize_advantages"}


@dataclass
class RunConfig:
    env: str
    algo: str
    net: str
    seeds: Tuple[int, ...]
    total_steps: Optional[int] = None
    out_dir: Optional[str] = None
    span: Dict[str, int] = field(default_factory=dict)
    mlp: Dict[str, int] = field(default_factory=dict)
    algo_overrides: Dict[str, object] = field(default_factory=dict)
    sweep: Dict[str, List[int]] = field(default_factory=dict)
    dataset: Dict[str, object] = field(default_factory=dict)

    def arch(self) -> Dict:
        """Nested architecture dict consumed by the network factory."""
        if self.net == "span":
            return dict(self.span)
        base = {}
        roles: Dict[str, Dict] = {}
        for key, val in self.mlp.items():
            if "_" in key and key.split("_", 1)[0] in ("actor", "critic", "value"):
                role, sub = key.split("_", 1)
                roles.setdefault(role, {})[sub] = val
            else:
                base[key] = val
        base.update({k: v for k, v in roles.items()})
        return base

    def algo_config(self):
        """Resolved algorithm config dataclass, overrides applied."""
        overrides = dict(self.algo_overrides)
        if self.algo == "ppo":
            if self.total_steps is not None:
                overrides.setdefault("total_steps", self.total_steps)
            return PpoConfig(**overrides)
        if self.algo == "sac":
            if self.total_steps is not None:
                overrides.setdefault("total_steps", self.total_steps)
            return SacConfig(**overrides)
        overrides.pop("dataset", None)
        if self.total_steps is not None:
            overrides.setdefault("iterations", self.total_steps)
        return IqlConfig(**overrides)

    def fingerprint(self) -> str:
        payload = {
            "env": self.env,
            "algo": self.algo,
            "net": self.net,
            "arch": self.arch(),
            "algo_config": dataclasses.asdict(self.algo_config()),
        }
        digest = hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()
        return digest[:16]


def _coerce(section: str, key: str, raw: str):
    raw = raw.strip()
    try:
        if section == "sweep":
            return [int(v) for v in raw.split(",") if v.strip()] if raw else []
        if key == "seeds":
            return tuple(int(v) for v in raw.split(",") if v.strip())
        if key in _BOOL_KEYS:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from None


def parse_config_text(text: str) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from None

    sections: Dict[str, Dict[str, object]] = {}
    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            raise ConfigError(f"unknown section [{section}]")
        sections[section] = {}
        for key, raw in parser.items(section):
            if key not in _KNOWN_KEYS[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            sections[section][key] = _coerce(section, key, raw)

    run = sections.get("run")
    if not run:
        raise ConfigError("missing [run] section")
    for required in ("env", "algo", "net"):
        if required not in run:
            raise ConfigError(f"[run] missing required key {required!r}")

    cfg = RunConfig(
        env=str(run["env"]),
        algo=str(run["algo"]),
        net=str(run["net"]),
        seeds=run.get("seeds", (0,)),
        total_steps=run.get("total_steps"),
        out_dir=run.get("out"),
        span=sections.get("span", {}),
        mlp=sections.get("mlp", {}),
        algo_overrides=sections.get(cfg_algo_section(run["algo"]), {}) if run.get("algo") in _ALGOS else {},
        sweep=sections.get("sweep", {}),
        dataset=sections.get("dataset", {}),
    )
    validate_config(cfg)
    return cfg


def cfg_algo_section(algo: str) -> str:
    return str(algo)


def parse_config(path) -> RunConfig:
    try:
        with open(path) as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text)


def validate_config(cfg: RunConfig):
    if cfg.env not in env_names():
        raise ConfigError(f"unknown env {cfg.env!r}; known: {env_names()}")
    if cfg.algo not in _ALGOS:
        raise ConfigError(f"unknown algo {cfg.algo!r}; known: {_ALGOS}")
    if cfg.net not in _NETS:
        raise ConfigError(f"unknown net {cfg.net!r}; known: {_NETS}")
    if not cfg.seeds:
        raise ConfigError("at least one seed required")

    spec = env_spec(cfg.env)
    if cfg.algo == "ppo" and not spec.discrete:
        raise ConfigError(f"ppo requires a discrete action space; {cfg.env} is continuous")
    if cfg.algo in ("sac", "iql") and spec.discrete:
        raise ConfigError(f"{cfg.algo} requires a continuous action space; {cfg.env} is discrete")

    if cfg.net == "span":
        missing = {"nmodes", "nelems", "degree"} - set(cfg.span)
        if missing:
            raise ConfigError(f"[span] missing keys: {sorted(missing)}")
    else:
        arch = cfg.arch()
        roles = {k: v for k, v in arch.items() if isinstance(v, dict)}
        base_ok = "hidden1" in arch and "hidden2" in arch
        roles_ok = roles and all({"hidden1", "hidden2"} <= set(v) for v in roles.values())
        if not (base_ok or roles_ok):
            raise ConfigError("[mlp] needs hidden1/hidden2 (or per-role variants)")

    try:
        cfg.algo_config()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{cfg.algo}] invalid settings: {exc}") from None


def config_to_text(cfg: RunConfig) -> str:
    """Serialize back to the flat key=value format (round-trips via parse)."""
    lines = ["[run]"]
    lines.append(f"env = {cfg.env}")
    lines.append(f"algo = {cfg.algo}")
    lines.append(f"net = {cfg.net}")
    lines.append(f"seeds = {','.join(str(s) for s in cfg.seeds)}")
    if cfg.total_steps is not None:
        lines.append(f"total_steps = {cfg.total_steps}")
    if cfg.out_dir is not None:
        lines.append(f"out = {cfg.out_dir}")

    def emit(section: str, data: Dict):
        if not data:
            return
        lines.append("")
        lines.append(f"[{section}]")
        for key, val in data.items():
            if isinstance(val, (list, tuple)):
                lines.append(f"{key} = {','.join(str(v) for v in val)}")
            else:
                lines.append(f"{key} = {val}")

    emit("span", cfg.span)
    emit("mlp", cfg.mlp)
    emit(cfg.algo, cfg.algo_overrides)
    emit("sweep", cfg.sweep)
    emit("dataset", cfg.dataset)
    return "\n".join(lines) + "\n"
