"""Non-stationarity surrogate from opponent-model prediction divergence.

Agent i's signal is the coordination-weighted sum, over opponents j, of the
KL between i's prediction of j's action distribution and j's actual policy,
clamped to a configurable range. The system-level signal is the plain sum
over agents, and the decomposition network is regressed onto it.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F

NS_PROJECTION_MAX = 10.0


def project_ns(value: float, c_max: float = NS_PROJECTION_MAX) -> float:
    """Element-wise clamp of the surrogate to [0, c_max]."""
    return float(min(max(value, 0.0), c_max))


def local_ns(
    i: int,
    coord_row: np.ndarray,
    modeling_bank,
    policies,
    obs: Sequence[torch.Tensor],
    c_max: float = NS_PROJECTION_MAX,
) -> float:
    """Clamped coordination-weighted prediction divergence for agent i.

    Each opponent term is the batch mean of the exact discrete KL between
    the prediction model's distribution (from agent i's observation) and
    the opponent's policy distribution (from the opponent's observation).
    """
    total = 0.0
    with torch.no_grad():
        for j in range(len(policies)):
            if j == i or coord_row[j] == 0.0:
                continue
            predicted = modeling_bank.predict(i, j, obs[i])
            actual = policies[j](obs[j])
            pair_kl = (predicted * (predicted.log() - actual.log())).sum(-1).mean()
            total += float(coord_row[j]) * float(pair_kl)
    return project_ns(total, c_max)


def system_ns(local_signals: Sequence[float]) -> float:
    return float(np.sum(local_signals))


def modeling_loss(modeling_bank, obs: Sequence[torch.Tensor],
                  actions: torch.Tensor) -> torch.Tensor:
    """Cross-entropy of every prediction model against executed actions."""
    loss = torch.zeros(())
    for i, j in modeling_bank.pairs():
        predicted = modeling_bank.predict(i, j, obs[i])
        loss = loss + F.nll_loss(predicted.log(), actions[:, j])
    return loss


def ns_regression_loss(khat: torch.Tensor, d_signals: torch.Tensor) -> torch.Tensor:
    """Squared gap between total estimated divergence and total surrogate."""
    if khat.shape != d_signals.shape:
        raise ValueError(f"length mismatch: {tuple(khat.shape)} vs {tuple(d_signals.shape)}")
    return (khat.sum() - d_signals.sum()).pow(2)


def ns_regression_loss_with_aux(
    khat: torch.Tensor, d_signals: torch.Tensor, aux_weight: float = 0.1
) -> torch.Tensor:
    """Sum-matching loss plus a small per-agent shaping term.

    The sum-only objective leaves the per-agent split unconstrained; the
    auxiliary term nudges each estimate toward its own agent's surrogate so
    the decomposition stays identified.
    """
    return ns_regression_loss(khat, d_signals) + aux_weight * (
        (khat - d_signals).pow(2).sum()
    )
