"""Function approximators: local policies, attention critics, opponent models.

All policies are categorical over discrete actions. Output probabilities are
floored (default 1e-8, renormalised) so every log-ratio downstream is
finite. Critics are centralized: each agent's Q head sees its own encoding
plus an attention-weighted pool of the other agents' state-action
encodings, with the attention parameters shared across agents.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import List, Sequence

import torch
import torch.nn as nn
import torch.nn.functional as F

PROB_FLOOR = 1e-8
HIDDEN_DIM = 128
N_HIDDEN_LAYERS = 2
ATTENTION_HEADS = 4


def mlp(in_dim: int, out_dim: int, hidden: int, n_layers: int = N_HIDDEN_LAYERS) -> nn.Sequential:
    layers: List[nn.Module] = []
    prev = in_dim
    for _ in range(n_layers):
        layers += [nn.Linear(prev, hidden), nn.ReLU()]
        prev = hidden
    layers.append(nn.Linear(prev, out_dim))
    return nn.Sequential(*layers)


def floor_probs(probs: torch.Tensor, floor: float = PROB_FLOOR) -> torch.Tensor:
    """Mix with uniform mass so each probability is >= floor and rows still sum to 1."""
    n = probs.shape[-1]
    return (1.0 - n * floor) * probs + floor


class CategoricalPolicy(nn.Module):
    """Local observation -> floored categorical action distribution."""

    def __init__(self, obs_dim: int, n_actions: int, hidden: int = HIDDEN_DIM,
                 prob_floor: float = PROB_FLOOR):
        super().__init__()
        self.n_actions = n_actions
        self.prob_floor = prob_floor
        self.net = mlp(obs_dim, n_actions, hidden)

    def forward(self, obs: torch.Tensor) -> torch.Tensor:
        return floor_probs(F.softmax(self.net(obs), dim=-1), self.prob_floor)

    def log_probs(self, obs: torch.Tensor) -> torch.Tensor:
        return torch.log(self(obs))


class OpponentModel(nn.Module):
    """Predicts another agent's action distribution from the owner's observation."""

    def __init__(self, obs_dim: int, n_actions: int, hidden: int = HIDDEN_DIM,
                 prob_floor: float = PROB_FLOOR):
        super().__init__()
        self.n_actions = n_actions
        self.prob_floor = prob_floor
        self.net = mlp(obs_dim, n_actions, hidden)

    def forward(self, obs: torch.Tensor) -> torch.Tensor:
        return floor_probs(F.softmax(self.net(obs), dim=-1), self.prob_floor)


class OpponentModelBank(nn.Module):
    """One prediction model per ordered pair (owner i, opponent j != i)."""

    def __init__(self, obs_dims: Sequence[int], n_actions: Sequence[int],
                 hidden: int = HIDDEN_DIM):
        super().__init__()
        self.n_agents = len(obs_dims)
        self.models = nn.ModuleDict()
        for i in range(self.n_agents):
            for j in range(self.n_agents):
                if i == j:
                    continue
                self.models[self._key(i, j)] = OpponentModel(
                    obs_dims[i], n_actions[j], hidden
                )

    @staticmethod
    def _key(i: int, j: int) -> str:
        return f"{i}->{j}"

    def predict(self, i: int, j: int, obs_i: torch.Tensor) -> torch.Tensor:
        if i == j:
            raise ValueError(f"agent {i} does not model itself")
        return self.models[self._key(i, j)](obs_i)

    def pairs(self):
        for i in range(self.n_agents):
            for j in range(self.n_agents):
                if i != j:
                    yield i, j


class AttentionCritic(nn.Module):
    """Centralized critics with attention pooling over the other agents.

    forward() returns, per agent, Q values for every own action given the
    other agents' executed actions; one forward pass therefore provides
    everything the counterfactual expectations over own actions need.
    """

    def __init__(self, obs_dims: Sequence[int], n_actions: Sequence[int],
                 hidden: int = HIDDEN_DIM, n_heads: int = ATTENTION_HEADS):
        super().__init__()
        if hidden % n_heads != 0:
            raise ValueError("hidden size must be divisible by the head count")
        self.n_agents = len(obs_dims)
        self.n_heads = n_heads
        self.head_dim = hidden // n_heads

        self.state_encoders = nn.ModuleList(
            [mlp(d, hidden, hidden, n_layers=1) for d in obs_dims]
        )
        self.sa_encoders = nn.ModuleList(
            [mlp(d + a, hidden, hidden, n_layers=1) for d, a in zip(obs_dims, n_actions)]
        )
        # attention parameters shared among agents
        self.key_proj = nn.ModuleList(
            [nn.Linear(hidden, self.head_dim, bias=False) for _ in range(n_heads)]
        )
        self.selector_proj = nn.ModuleList(
            [nn.Linear(hidden, self.head_dim, bias=False) for _ in range(n_heads)]
        )
        self.value_proj = nn.ModuleList(
            [nn.Sequential(nn.Linear(hidden, self.head_dim), nn.LeakyReLU())
             for _ in range(n_heads)]
        )
        self.q_heads = nn.ModuleList(
            [mlp(2 * hidden, a, hidden, n_layers=1) for a in n_actions]
        )

    def encode(self, obs: Sequence[torch.Tensor], actions_onehot: Sequence[torch.Tensor]):
        s_enc = [enc(o) for enc, o in zip(self.state_encoders, obs)]
        sa_enc = [
            enc(torch.cat([o, a], dim=-1))
            for enc, o, a in zip(self.sa_encoders, obs, actions_onehot)
        ]
        return s_enc, sa_enc

    def attend(self, s_enc: Sequence[torch.Tensor], sa_enc: Sequence[torch.Tensor]):
        """Attention pooling of everyone else's encodings, for every agent.

        Returns (pooled, weights, logits): pooled[i] is (B, hidden); weights
        and logits are lists over agents of (heads, B, n_agents-1) tensors.
        """
        pooled, weights_all, logits_all = [], [], []
        scale = self.head_dim ** 0.5
        for i in range(self.n_agents):
            others = [j for j in range(self.n_agents) if j != i]
            head_outputs, head_weights, head_logits = [], [], []
            for h in range(self.n_heads):
                selector = self.selector_proj[h](s_enc[i])  # (B, d)
                keys = torch.stack([self.key_proj[h](sa_enc[j]) for j in others], dim=1)
                values = torch.stack([self.value_proj[h](sa_enc[j]) for j in others], dim=1)
                logits = torch.einsum("bd,bjd->bj", selector, keys) / scale
                w = F.softmax(logits, dim=-1)
                head_outputs.append(torch.einsum("bj,bjd->bd", w, values))
                head_weights.append(w)
                head_logits.append(logits)
            pooled.append(torch.cat(head_outputs, dim=-1))
            weights_all.append(torch.stack(head_weights))
            logits_all.append(torch.stack(head_logits))
        return pooled, weights_all, logits_all

    def forward(self, obs: Sequence[torch.Tensor], actions_onehot: Sequence[torch.Tensor],
                return_attention: bool = False):
        if len(obs) != self.n_agents or len(actions_onehot) != self.n_agents:
            raise ValueError(f"need inputs for all {self.n_agents} agents")
        s_enc, sa_enc = self.encode(obs, actions_onehot)
        pooled, weights, logits = self.attend(s_enc, sa_enc)
        all_q = [
            head(torch.cat([s_enc[i], pooled[i]], dim=-1))
            for i, head in enumerate(self.q_heads)
        ]
        if return_attention:
            return all_q, weights, logits
        return all_q


def hard_update(target: nn.Module, source: nn.Module) -> None:
    target.load_state_dict(source.state_dict())


def soft_update(target: nn.Module, source: nn.Module, tau: float) -> None:
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    with torch.no_grad():
        for t, s in zip(target.parameters(), source.parameters()):
            t.mul_(1.0 - tau).add_(s, alpha=tau)
        for t, s in zip(target.buffers(), source.buffers()):
            t.copy_(s)


@dataclass
class PolicySnapshot:
    """Behavior nets plus their target and delayed-old copies.

    ``old_policies`` is the mirror-descent reference; it is refreshed (hard
    copied from behavior) every ``delay`` update iterations and bitwise
    constant in between.
    """

    policies: List[CategoricalPolicy]
    critic: AttentionCritic
    target_policies: List[CategoricalPolicy]
    target_critic: AttentionCritic
    old_policies: List[CategoricalPolicy]

    @classmethod
    def create(cls, policies: List[CategoricalPolicy], critic: AttentionCritic
               ) -> "PolicySnapshot":
        return cls(
            policies=policies,
            critic=critic,
            target_policies=[copy.deepcopy(p) for p in policies],
            target_critic=copy.deepcopy(critic),
            old_policies=[copy.deepcopy(p) for p in policies],
        )

    def update_targets(self, mode: str = "soft", tau: float = 0.01) -> None:
        if mode == "hard":
            for tgt, src in zip(self.target_policies, self.policies):
                hard_update(tgt, src)
            hard_update(self.target_critic, self.critic)
        elif mode == "soft":
            for tgt, src in zip(self.target_policies, self.policies):
                soft_update(tgt, src, tau)
            soft_update(self.target_critic, self.critic, tau)
        else:
            raise ValueError(f"unknown target update mode {mode!r}")

    def refresh_old(self) -> None:
        for old, src in zip(self.old_policies, self.policies):
            hard_update(old, src)


def mirror_descent_tick(iteration: int, snapshot: PolicySnapshot, delay: int) -> bool:
    """Refresh the delayed-old policy copy at iterations 0, delay, 2*delay, ...

    Returns True when a refresh happened.
    """
    if delay < 1:
        raise ValueError("delay must be >= 1")
    if iteration % delay == 0:
        snapshot.refresh_old()
        return True
    return False
