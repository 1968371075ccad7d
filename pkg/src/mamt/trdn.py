"""Trust region decomposition network: graph-based divergence estimation.

Two encoder branches with identical structure and independent parameters
embed each agent's (observation, action, trust-region coefficient) triple.
The first branch's embeddings are mixed by one round of coordination-
weighted message passing over the undirected agent graph; the second
branch's embeddings skip the graph. Per agent, the concatenated pair feeds
a shared head with a softplus output: one non-negative joint-divergence
contribution estimate per agent. The trust-region coefficients enter
through a learned scalar embedding, which is the differentiable pathway the
slow update needs.
"""

from __future__ import annotations

from typing import List, Sequence

import torch
import torch.nn as nn
import torch.nn.functional as F

from .nets import mlp

EPS_EMBED_DIM = 8


class AgentEncoder(nn.Module):
    """Shared per-agent encoder over (obs, action one-hot, eps embedding)."""

    def __init__(self, obs_dim: int, n_actions: int, hidden: int,
                 eps_embed_dim: int = EPS_EMBED_DIM):
        super().__init__()
        self.eps_embed = nn.Linear(1, eps_embed_dim)
        self.net = mlp(obs_dim + n_actions + eps_embed_dim, hidden, hidden, n_layers=1)

    def forward(self, obs: torch.Tensor, acts_onehot: torch.Tensor,
                eps: torch.Tensor) -> torch.Tensor:
        """obs (B, n, obs_dim), acts (B, n, A), eps (n,) -> (B, n, hidden)."""
        b = obs.shape[0]
        emb = self.eps_embed(eps[:, None])  # (n, E)
        emb = emb[None, :, :].expand(b, -1, -1)
        return self.net(torch.cat([obs, acts_onehot, emb], dim=-1))


class GraphConv(nn.Module):
    """One round of weighted neighbourhood aggregation."""

    def __init__(self, hidden: int):
        super().__init__()
        self.self_proj = nn.Linear(hidden, hidden)
        self.neighbor_proj = nn.Linear(hidden, hidden, bias=False)

    def forward(self, h: torch.Tensor, weights: torch.Tensor) -> torch.Tensor:
        """h (B, n, H), weights (n, n) symmetric with zero diagonal."""
        neighbor_sum = torch.einsum("ij,bjh->bih", weights, self.neighbor_proj(h))
        return F.relu(self.self_proj(h) + neighbor_sum)


class TrustRegionDecompositionNetwork(nn.Module):
    """Per-agent joint-divergence estimates from graph message passing.

    Requires homogeneous agents (equal observation/action sizes) so the
    encoders can be shared, which is also what makes the outputs
    permutation-equivariant under a consistent relabeling of agents.
    """

    def __init__(self, obs_dims: Sequence[int], n_actions: Sequence[int],
                 hidden: int = 128, eps_embed_dim: int = EPS_EMBED_DIM):
        super().__init__()
        if len(set(obs_dims)) != 1 or len(set(n_actions)) != 1:
            raise ValueError("decomposition network expects homogeneous agent spaces")
        self.n_agents = len(obs_dims)
        self.n_actions = n_actions[0]
        self.mp_encoder = AgentEncoder(obs_dims[0], n_actions[0], hidden, eps_embed_dim)
        self.graph = GraphConv(hidden)
        self.plain_encoder = AgentEncoder(obs_dims[0], n_actions[0], hidden, eps_embed_dim)
        self.kl_head = mlp(2 * hidden, 1, hidden, n_layers=1)

    def encode_agents(self, obs: torch.Tensor, acts_onehot: torch.Tensor,
                      eps: torch.Tensor) -> torch.Tensor:
        """Pre-message embeddings of the graph branch, (B, n, H)."""
        return self.mp_encoder(obs, acts_onehot, eps)

    def message_pass(self, embeddings: torch.Tensor, weights: torch.Tensor) -> torch.Tensor:
        return self.graph(embeddings, weights)

    def kl_estimate(self, branch_mp: torch.Tensor, branch_plain: torch.Tensor) -> torch.Tensor:
        """Non-negative per-agent estimates, (B, n)."""
        joint = torch.cat([branch_mp, branch_plain], dim=-1)
        return F.softplus(self.kl_head(joint)).squeeze(-1)

    def forward(self, obs_list: List[torch.Tensor], actions: torch.Tensor,
                eps: torch.Tensor, coord_weights: torch.Tensor) -> torch.Tensor:
        """Estimates for a batch: obs per agent, executed actions, eps, graph.

        obs_list: n tensors (B, obs_dim); actions: (B, n) long;
        eps: (n,) tensor (may require grad); coord_weights: (n, n) symmetric.
        Returns (B, n) non-negative estimates.
        """
        obs = torch.stack(obs_list, dim=1)
        acts_onehot = F.one_hot(actions.long(), self.n_actions).to(obs.dtype)
        h1 = self.encode_agents(obs, acts_onehot, eps)
        h1 = self.message_pass(h1, coord_weights.to(obs.dtype))
        h2 = self.plain_encoder(obs, acts_onehot, eps)
        return self.kl_estimate(h1, h2)
