"""Experiment configuration.

The field defaults are the full-scale settings the algorithms were designed
around. The desk profile shrinks the budget for laptop-scale runs; anything
it changes is recorded explicitly in the saved config snapshot of each run.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Tuple

import yaml

ALGORITHMS = ("mamd", "mamt", "baseline", "mamd-op")


class ConfigError(ValueError):
    """Unknown or invalid configuration key/value."""


@dataclass
class EnvConfig:
    name: str = "spread"
    horizon: int = 25
    n_parallel: int = 12


@dataclass
class ExperimentConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    algorithm: str = "mamd"
    seeds: List[int] = field(default_factory=lambda: [0])
    out_dir: str = "runs/experiment"

    # rollout / update cadence
    total_env_steps: int = 50_000      # "step size": 10k-50k
    num_epochs_per_step: int = 4
    steps_per_update: int = 100
    buffer_size: int = 1_000_000
    batch_size: int = 1024

    # networks
    hidden_dim: int = 128
    num_critic_attention_heads: int = 4

    # optimisation
    discount: float = 0.99
    adam_lr: float = 1e-3
    adam_mom: float = 0.9
    adam_eps: float = 1e-7
    lr_decay: float = 0.0
    policy_reg_coeff: float = 0.001
    modeling_reg_coeff: float = 0.001
    critic_reg_coeff: float = 1.0
    critic_clip_grad_per_agent: float = 10.0    # clip = 10 * num agents
    policy_clip_grad: float = 0.5
    modeling_clip_grad: float = 0.5
    trdn_clip_grad_per_agent: float = 10.0
    soft_reward_scale: float = 100.0
    entropy_alpha: float = 0.01
    target_tau: float = 0.01

    # mirror descent / trust regions
    mirror_descent_delay: int = 100
    trust_region: float = 1.0            # total budget; plain MAMD uses eps_i = eps / n
    trust_region_clip: Tuple[float, float] = (0.01, 100.0)
    trust_region_init: float = 1.0       # adaptive per-agent starting value
    tsallis_q: float = 0.2               # accepted but inert: no defining update uses it

    # coordination / non-stationarity
    coord_delta: float = 0.2
    ns_projection_max: float = 10.0
    fast_steps_per_slow: int = 5

    # evaluation
    eval_interval: int = 1000
    eval_episodes: int = 10

    def __post_init__(self):
        if isinstance(self.env, dict):
            self.env = _build(EnvConfig, self.env)
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(
                f"unknown algorithm {self.algorithm!r}; choose one of {ALGORITHMS}"
            )
        lo, hi = self.trust_region_clip
        if not (0 < lo < hi):
            raise ConfigError(f"bad trust_region_clip {self.trust_region_clip}")
        if self.mirror_descent_delay < 1:
            raise ConfigError("mirror_descent_delay must be >= 1")
        if not 0.0 < self.discount <= 1.0:
            raise ConfigError("discount must lie in (0, 1]")
        if self.trust_region <= 0 or self.trust_region_init <= 0:
            raise ConfigError("trust region budgets must be positive")
        self.trust_region_clip = tuple(self.trust_region_clip)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        return _build(cls, data)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["trust_region_clip"] = list(out["trust_region_clip"])
        return out

    def save(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=False)

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        data = self.to_dict()
        for key, value in overrides.items():
            if key not in data:
                raise ConfigError(f"unknown config key {key!r}")
            data[key] = value
        return ExperimentConfig.from_dict(data)

    @classmethod
    def desk(cls, **overrides) -> "ExperimentConfig":
        """Laptop-scale profile: smaller budget, same algorithmic defaults."""
        base = dict(
            total_env_steps=4000,
            batch_size=256,
            buffer_size=50_000,
            hidden_dim=64,
            eval_interval=500,
            eval_episodes=5,
        )
        base.update(overrides)
        return cls.from_dict(base)


def _build(cls, data: dict):
    if not isinstance(data, dict):
        raise ConfigError(f"expected a mapping for {cls.__name__}, got {type(data).__name__}")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(
            f"unknown config key(s) {sorted(unknown)}; known keys: {sorted(known)}"
        )
    return cls(**data)
