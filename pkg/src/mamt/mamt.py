"""Adaptive trust-region allocation on top of the mirror-descent learner.

Each update iteration first measures the coordination structure and the
non-stationarity surrogate, then runs the two-timescale pair: one slow
ascent step on the value-minus-estimated-divergence objective for the
per-agent trust regions (clipped into their configured range), followed by
several fast descent steps on the decomposition network's regression loss.
The remainder of the iteration is the plain mirror-descent update with the
freshly adapted eps_i.
"""

from __future__ import annotations

from typing import Dict, Optional, Sequence

import numpy as np
import torch

from .config import ExperimentConfig
from .coord import CoordinationMatrix, coordination_coefficients
from .envs.base import PosgSpec
from .mamd import MamdLearner, counterfactual_baseline, onehot, to_tensor
from .nets import OpponentModelBank
from .nonstationarity import (
    local_ns,
    modeling_loss,
    ns_regression_loss,
    ns_regression_loss_with_aux,
    system_ns,
)
from .trdn import TrustRegionDecompositionNetwork


def epsilon_update(
    eps: np.ndarray, grad_f: np.ndarray, step: float, clip: Sequence[float]
) -> np.ndarray:
    """One ascent step on the allocation objective, clipped into range."""
    lo, hi = clip
    return np.clip(eps + step * np.asarray(grad_f), lo, hi)


def objective_f(
    critic,
    policies,
    trdn: TrustRegionDecompositionNetwork,
    batch: dict,
    eps: torch.Tensor,
    coord_weights: torch.Tensor,
) -> torch.Tensor:
    """Estimated total value minus estimated joint divergence, batch mean.

    The value part is the critic's expectation over each agent's own
    actions (detached: it carries no usable gradient to the trust regions);
    the divergence part is the decomposition network's output, which is the
    differentiable pathway from eps.
    """
    obs = [to_tensor(o) for o in batch["obs"]]
    actions = torch.as_tensor(batch["actions"], dtype=torch.long)
    acts_onehot = [onehot(actions[:, i], p.n_actions) for i, p in enumerate(policies)]
    with torch.no_grad():
        all_q = critic(obs, acts_onehot)
        value = sum(
            counterfactual_baseline(all_q[i], policies[i](obs[i])).mean()
            for i in range(len(policies))
        )
    khat = trdn(obs, actions, eps, coord_weights)  # (B, n)
    return value - khat.mean(dim=0).sum()


def trdn_regression_step(
    trdn: TrustRegionDecompositionNetwork,
    optimizer: torch.optim.Optimizer,
    obs,
    actions: torch.Tensor,
    eps: torch.Tensor,
    coord_weights: torch.Tensor,
    d_signals: torch.Tensor,
    clip_norm: float,
    aux_weight: float = 0.1,
) -> float:
    """One fast-timescale descent step on the decomposition regression loss."""
    khat = trdn(obs, actions, eps, coord_weights).mean(dim=0)
    loss = ns_regression_loss_with_aux(khat, d_signals, aux_weight)
    optimizer.zero_grad()
    loss.backward()
    torch.nn.utils.clip_grad_norm_(trdn.parameters(), clip_norm)
    optimizer.step()
    return float(loss.detach())


class MamtLearner(MamdLearner):
    """Mirror-descent learner with learned trust-region decomposition."""

    def __init__(
        self,
        spec: PosgSpec,
        config: ExperimentConfig,
        epsilon: Optional[Sequence[float]] = None,
        seed: int = 0,
    ):
        n = spec.n_agents
        if epsilon is None:
            epsilon = [config.trust_region_init] * n
        super().__init__(spec, config, epsilon=epsilon, seed=seed)

        self.modeling = OpponentModelBank(spec.obs_dims, spec.n_actions, config.hidden_dim)
        self.trdn = TrustRegionDecompositionNetwork(
            spec.obs_dims, spec.n_actions, hidden=config.hidden_dim
        )
        adam = dict(betas=(config.adam_mom, 0.999), eps=config.adam_eps)
        self.modeling_opt = torch.optim.Adam(
            self.modeling.parameters(), lr=config.adam_lr,
            weight_decay=config.modeling_reg_coeff, **adam,
        )
        self.trdn_opt = torch.optim.Adam(self.trdn.parameters(), lr=config.adam_lr, **adam)
        self.eps_step = config.adam_lr  # slow step size equals the fast one
        self.trdn_clip = config.trdn_clip_grad_per_agent * n
        self.coordination: CoordinationMatrix | None = None

    def update(self, batch: dict) -> Dict[str, float]:
        metrics = self._tick_old_policy()
        metrics.update(self._update_trust_regions(batch))
        metrics.update(self._update_modeling(batch))
        metrics.update(self._update_critic(batch))
        metrics.update(self._update_actors(batch))
        self._finish_iteration(metrics)
        return metrics

    def _update_trust_regions(self, batch: dict) -> Dict[str, float]:
        cfg = self.config
        n = self.spec.n_agents
        obs = [to_tensor(o) for o in batch["obs"]]
        actions = torch.as_tensor(batch["actions"], dtype=torch.long)

        coord = coordination_coefficients(
            self.snapshot.critic, self.snapshot.policies, batch, cfg.coord_delta
        )
        self.coordination = coord
        coord_weights = torch.as_tensor(coord.symmetrized(), dtype=torch.float32)

        d_signals = np.array(
            [
                local_ns(i, coord.matrix[i], self.modeling, self.snapshot.policies,
                         obs, cfg.ns_projection_max)
                for i in range(n)
            ]
        )
        d_total = system_ns(d_signals)
        d_tensor = torch.as_tensor(d_signals, dtype=torch.float32)

        # slow timescale: ascend F through the decomposition network's
        # eps pathway, then clip into the configured range
        eps = torch.tensor(self.epsilon, dtype=torch.float32, requires_grad=True)
        f_value = objective_f(
            self.snapshot.critic, self.snapshot.policies, self.trdn, batch, eps,
            coord_weights,
        )
        (grad_f,) = torch.autograd.grad(f_value, eps)
        self.epsilon = epsilon_update(
            self.epsilon, grad_f.numpy(), self.eps_step, cfg.trust_region_clip
        )

        # fast timescale: several regression steps on the decomposition net
        eps_fixed = torch.as_tensor(self.epsilon, dtype=torch.float32)
        ns_loss_value = 0.0
        for _ in range(cfg.fast_steps_per_slow):
            ns_loss_value = trdn_regression_step(
                self.trdn, self.trdn_opt, obs, actions, eps_fixed, coord_weights,
                d_tensor, self.trdn_clip,
            )

        with torch.no_grad():
            khat_final = self.trdn(obs, actions, eps_fixed, coord_weights).mean(dim=0)
            pure_ns_loss = float(ns_regression_loss(khat_final, d_tensor))

        metrics: Dict[str, float] = {
            "objective_f": float(f_value.detach()),
            "ns_loss": pure_ns_loss,
            "ns_loss_with_aux": ns_loss_value,
            "d_ns_total": d_total,
            "khat_total": float(khat_final.sum()),
        }
        for i in range(n):
            metrics[f"d_ns/{i}"] = float(d_signals[i])
            metrics[f"khat/{i}"] = float(khat_final[i])
            for j in range(n):
                if i != j:
                    metrics[f"coord_pre/{i}/{j}"] = float(coord.pre_threshold[i, j])
                    metrics[f"coord/{i}/{j}"] = float(coord.matrix[i, j])
        return metrics

    def _optimizers(self):
        return super()._optimizers() + [self.modeling_opt, self.trdn_opt]

    def _update_modeling(self, batch: dict) -> Dict[str, float]:
        obs = [to_tensor(o) for o in batch["obs"]]
        actions = torch.as_tensor(batch["actions"], dtype=torch.long)
        loss = modeling_loss(self.modeling, obs, actions)
        self.modeling_opt.zero_grad()
        loss.backward()
        torch.nn.utils.clip_grad_norm_(
            self.modeling.parameters(), self.config.modeling_clip_grad
        )
        self.modeling_opt.step()
        return {"modeling_loss": float(loss.detach())}
