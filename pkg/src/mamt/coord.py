"""Counterfactual coordination coefficients between agent pairs.

How much agent j's action choice moves agent i's critic value, normalised
per agent with a softmax over the opponents and sparsified with a
threshold. Rows are recomputed from the current critic every update, so the
matrix tracks the changing dependency structure during training.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
import torch

from .mamd import onehot, to_tensor


@dataclass(frozen=True)
class CoordinationMatrix:
    """Pairwise dependency weights, pre- and post-threshold.

    ``pre_threshold[i, j]`` is the softmax (over j != i) of agent i's
    batch-averaged counterfactual Q-gaps; the diagonal is zero and each row
    sums to 1 over the opponents. ``matrix`` zeroes the entries below
    ``delta``.
    """

    pre_threshold: np.ndarray
    matrix: np.ndarray
    delta: float

    @property
    def n_agents(self) -> int:
        return self.pre_threshold.shape[0]

    def symmetrized(self) -> np.ndarray:
        """Undirected edge weights for graph message passing."""
        return (self.matrix + self.matrix.T) / 2.0


def coordination_from_gaps(gaps: np.ndarray, delta: float) -> CoordinationMatrix:
    """Softmax-normalise per-agent gap rows and apply the sparsity threshold."""
    gaps = np.asarray(gaps, dtype=np.float64)
    n = gaps.shape[0]
    if n < 2:
        raise ValueError("coordination needs at least two agents")
    if not 0.0 <= delta < 1.0:
        raise ValueError(f"threshold must lie in [0, 1), got {delta}")
    pre = np.zeros((n, n))
    for i in range(n):
        others = [j for j in range(n) if j != i]
        row = gaps[i, others]
        row = np.exp(row - row.max())
        pre[i, others] = row / row.sum()
    matrix = np.where(pre >= delta, pre, 0.0)
    np.fill_diagonal(matrix, 0.0)
    return CoordinationMatrix(pre_threshold=pre, matrix=matrix, delta=delta)


def counterfactual_marginal(
    critic,
    policy_j,
    obs: Sequence[torch.Tensor],
    actions: torch.Tensor,
    acts_onehot: List[torch.Tensor],
    j: int,
) -> List[torch.Tensor]:
    """Per-agent Q with agent j's action integrated out under policy_j.

    Returns one (B,) tensor per agent i: the exact expectation over agent
    j's candidate actions of Q_i at i's executed action, holding everyone
    else's executed actions fixed.
    """
    n_actions_j = policy_j.n_actions
    with torch.no_grad():
        probs_j = policy_j(obs[j])  # (B, A_j)
        n = len(obs)
        batch = obs[0].shape[0]
        marginals = [torch.zeros(batch) for _ in range(n)]
        for a_j in range(n_actions_j):
            candidate = list(acts_onehot)
            candidate[j] = onehot(torch.full((batch,), a_j, dtype=torch.long), n_actions_j)
            all_q = critic(obs, candidate)
            weight = probs_j[:, a_j]
            for i in range(n):
                q_i = all_q[i].gather(1, actions[:, i][:, None]).squeeze(1)
                marginals[i] = marginals[i] + weight * q_i
    return marginals


def coordination_coefficients(
    critic,
    policies,
    batch: dict,
    delta: float,
) -> CoordinationMatrix:
    """Batch-averaged |counterfactual Q-gap| rows -> softmax -> threshold."""
    if len(batch["rewards"]) == 0:
        raise ValueError("empty batch")
    n = len(policies)
    obs = [to_tensor(o) for o in batch["obs"]]
    actions = torch.as_tensor(batch["actions"], dtype=torch.long)
    acts_onehot = [onehot(actions[:, i], p.n_actions) for i, p in enumerate(policies)]

    with torch.no_grad():
        all_q = critic(obs, acts_onehot)
        q_taken = [
            all_q[i].gather(1, actions[:, i][:, None]).squeeze(1) for i in range(n)
        ]
        gaps = np.zeros((n, n))
        for j in range(n):
            marginals = counterfactual_marginal(critic, policies[j], obs, actions,
                                                acts_onehot, j)
            for i in range(n):
                if i == j:
                    continue
                gaps[i, j] = float((marginals[i] - q_taken[i]).abs().mean())
    return coordination_from_gaps(gaps, delta)
