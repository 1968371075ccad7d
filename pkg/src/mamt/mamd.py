"""Mirror-descent multi-agent actor-critic with per-agent trust regions.

One learner owns all parameter updates. Each update iteration refreshes the
delayed old-policy copy when due, regresses the centralized critics onto
soft one-step targets, takes one mirror-descent policy-gradient step per
agent (KL penalty to the old copy scaled by 1/eps_i), and soft-updates the
target networks. eps_i = inf turns the penalty term into an exact zero,
which is how the unconstrained baseline is obtained.
"""

from __future__ import annotations

import math
from typing import Dict, List, Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F

from .config import ExperimentConfig
from .envs.base import PosgSpec
from .nets import (
    AttentionCritic,
    CategoricalPolicy,
    PolicySnapshot,
    mirror_descent_tick,
)


def to_tensor(x, dtype=torch.float32) -> torch.Tensor:
    return torch.as_tensor(np.asarray(x), dtype=dtype)


def onehot(indices: torch.Tensor, n: int, dtype=torch.float32) -> torch.Tensor:
    return F.one_hot(indices.long(), n).to(dtype)


def critic_targets(
    snapshot: PolicySnapshot,
    batch: dict,
    gamma: float,
    alpha: float,
    reward_scale: float,
    rng: np.random.Generator,
    dtype=torch.float32,
) -> List[torch.Tensor]:
    """Soft one-step regression targets, one (B,) tensor per agent.

    Next joint actions are sampled once per transition from the target
    policies; the entropy correction uses the behavior policy's log-prob of
    the sampled action. Terminal transitions drop the bootstrap term.
    """
    n = len(snapshot.policies)
    next_obs = [to_tensor(o, dtype) for o in batch["next_obs"]]
    with torch.no_grad():
        next_probs = [pol(o) for pol, o in zip(snapshot.target_policies, next_obs)]
        next_actions = [
            torch.from_numpy(sample_from_probs(p.cpu().numpy(), rng)) for p in next_probs
        ]
        next_onehot = [
            onehot(a, pol.n_actions, dtype) for a, pol in zip(next_actions, snapshot.policies)
        ]
        all_q_next = snapshot.target_critic(next_obs, next_onehot)
        targets = []
        for i in range(n):
            q_next = all_q_next[i].gather(1, next_actions[i][:, None]).squeeze(1)
            logp_next = (
                snapshot.policies[i]
                .log_probs(next_obs[i])
                .gather(1, next_actions[i][:, None])
                .squeeze(1)
            )
            r = to_tensor(batch["rewards"][:, i], dtype) * reward_scale
            not_done = 1.0 - to_tensor(batch["dones"][:, i], dtype)
            targets.append(r + gamma * not_done * (q_next - alpha * logp_next))
    return targets


def sample_from_probs(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Vectorised categorical sampling, one draw per row."""
    u = rng.random(probs.shape[0])
    cum = np.cumsum(probs, axis=1)
    cum[:, -1] = 1.0 + 1e-12
    return (u[:, None] >= cum).sum(axis=1).astype(np.int64)


def critic_loss(
    snapshot: PolicySnapshot,
    batch: dict,
    targets: Sequence[torch.Tensor],
    attention_reg_coeff: float = 0.0,
    dtype=torch.float32,
) -> torch.Tensor:
    """Sum over agents of MSE against targets, plus attention-logit L2."""
    if len(batch["rewards"]) == 0:
        raise ValueError("empty batch")
    obs = [to_tensor(o, dtype) for o in batch["obs"]]
    actions = torch.as_tensor(batch["actions"], dtype=torch.long)
    acts_onehot = [
        onehot(actions[:, i], pol.n_actions, dtype)
        for i, pol in enumerate(snapshot.policies)
    ]
    all_q, _, attend_logits = snapshot.critic(obs, acts_onehot, return_attention=True)
    loss = torch.zeros((), dtype=dtype)
    for i, target in enumerate(targets):
        q_taken = all_q[i].gather(1, actions[:, i][:, None]).squeeze(1)
        loss = loss + F.mse_loss(q_taken, target.detach())
    if attention_reg_coeff:
        reg = sum(logits.pow(2).mean() for logits in attend_logits)
        loss = loss + attention_reg_coeff * reg
    return loss


def counterfactual_baseline(all_q: torch.Tensor, probs: torch.Tensor) -> torch.Tensor:
    """Expected Q over the agent's own actions with the others' actions fixed."""
    return (probs * all_q).sum(dim=-1)


def actor_multiplier(
    logp_taken: torch.Tensor,
    old_logp_taken: torch.Tensor,
    q_taken: torch.Tensor,
    baseline: torch.Tensor,
    eps_i: float,
) -> torch.Tensor:
    """Per-sample policy-gradient multiplier with the trust-region penalty.

    The penalty enters with a minus sign so that divergence from the old
    policy lowers the ascent objective; the per-sample divergence estimate
    is the log-ratio of the taken action. eps_i = inf contributes an exact
    arithmetic zero.
    """
    if not eps_i > 0:
        raise ValueError(f"trust region size must be positive, got {eps_i}")
    penalty_weight = 0.0 if math.isinf(eps_i) else 1.0 / eps_i
    kl_hat = logp_taken - old_logp_taken
    advantage = q_taken - baseline
    return (advantage - penalty_weight * kl_hat).detach()


def actor_loss(
    policy: CategoricalPolicy,
    old_policy: CategoricalPolicy,
    obs_i: torch.Tensor,
    actions_i: torch.Tensor,
    all_q_i: torch.Tensor,
    eps_i: float,
) -> torch.Tensor:
    """Negated surrogate whose gradient is the mirror-descent policy gradient."""
    logp_all = policy.log_probs(obs_i)
    logp_taken = logp_all.gather(1, actions_i[:, None]).squeeze(1)
    with torch.no_grad():
        old_logp_taken = (
            old_policy.log_probs(obs_i).gather(1, actions_i[:, None]).squeeze(1)
        )
        probs = logp_all.exp()
        q_taken = all_q_i.gather(1, actions_i[:, None]).squeeze(1)
        baseline = counterfactual_baseline(all_q_i, probs)
    multiplier = actor_multiplier(
        logp_taken.detach(), old_logp_taken, q_taken, baseline, eps_i
    )
    return -(logp_taken * multiplier).mean()


def batch_policy_kl(policy: CategoricalPolicy, reference: CategoricalPolicy,
                    obs: torch.Tensor) -> float:
    """Batch mean of the exact local KL(policy || reference)."""
    with torch.no_grad():
        p = policy(obs)
        q = reference(obs)
        return float((p * (p.log() - q.log())).sum(-1).mean())


class MamdLearner:
    """Owns the nets and performs all update iterations for one run."""

    def __init__(
        self,
        spec: PosgSpec,
        config: ExperimentConfig,
        epsilon: Optional[Sequence[float]] = None,
        seed: int = 0,
    ):
        self.spec = spec
        self.config = config
        n = spec.n_agents
        if epsilon is None:
            epsilon = [config.trust_region / n] * n
        self.epsilon = np.asarray(epsilon, dtype=np.float64)
        if np.any(self.epsilon <= 0):
            raise ValueError("every eps_i must be positive (inf disables the penalty)")

        torch.manual_seed(seed)
        policies = [
            CategoricalPolicy(spec.obs_dims[i], spec.n_actions[i], config.hidden_dim)
            for i in range(n)
        ]
        critic = AttentionCritic(
            spec.obs_dims,
            spec.n_actions,
            hidden=config.hidden_dim,
            n_heads=config.num_critic_attention_heads,
        )
        self.snapshot = PolicySnapshot.create(policies, critic)
        self._rng = np.random.default_rng(seed + 1)

        adam = dict(betas=(config.adam_mom, 0.999), eps=config.adam_eps)
        self.policy_opts = [
            torch.optim.Adam(
                p.parameters(), lr=config.adam_lr,
                weight_decay=config.policy_reg_coeff, **adam,
            )
            for p in policies
        ]
        self.critic_opt = torch.optim.Adam(
            critic.parameters(), lr=config.adam_lr, **adam
        )
        self.iteration = 0
        self.critic_clip = config.critic_clip_grad_per_agent * n

    def act(self, obs_batch: List[np.ndarray], greedy: bool = False) -> np.ndarray:
        """Actions for a batch of parallel observations, (n_envs, n_agents)."""
        with torch.no_grad():
            probs = [
                pol(to_tensor(obs)).cpu().numpy()
                for pol, obs in zip(self.snapshot.policies, obs_batch)
            ]
        if greedy:
            return np.stack([p.argmax(axis=1) for p in probs], axis=1)
        return np.stack([sample_from_probs(p, self._rng) for p in probs], axis=1)

    def update(self, batch: dict) -> Dict[str, float]:
        metrics = self._tick_old_policy()
        metrics.update(self._update_critic(batch))
        metrics.update(self._update_actors(batch))
        self._finish_iteration(metrics)
        return metrics

    def _tick_old_policy(self) -> Dict[str, float]:
        refreshed = mirror_descent_tick(
            self.iteration, self.snapshot, self.config.mirror_descent_delay
        )
        return {"old_policy_refreshed": float(refreshed)}

    def _update_critic(self, batch: dict) -> Dict[str, float]:
        cfg = self.config
        targets = critic_targets(
            self.snapshot, batch, cfg.discount, cfg.entropy_alpha,
            cfg.soft_reward_scale, self._rng,
        )
        c_loss = critic_loss(self.snapshot, batch, targets, cfg.critic_reg_coeff)
        self.critic_opt.zero_grad()
        c_loss.backward()
        torch.nn.utils.clip_grad_norm_(self.snapshot.critic.parameters(), self.critic_clip)
        self.critic_opt.step()
        return {"critic_loss": float(c_loss.detach())}

    def _update_actors(self, batch: dict) -> Dict[str, float]:
        cfg = self.config
        obs = [to_tensor(o) for o in batch["obs"]]
        actions = torch.as_tensor(batch["actions"], dtype=torch.long)
        acts_onehot = [
            onehot(actions[:, i], pol.n_actions)
            for i, pol in enumerate(self.snapshot.policies)
        ]
        with torch.no_grad():
            all_q = self.snapshot.critic(obs, acts_onehot)

        metrics: Dict[str, float] = {}
        for i, (policy, old) in enumerate(
            zip(self.snapshot.policies, self.snapshot.old_policies)
        ):
            loss_i = actor_loss(policy, old, obs[i], actions[:, i], all_q[i], self.epsilon[i])
            self.policy_opts[i].zero_grad()
            loss_i.backward()
            torch.nn.utils.clip_grad_norm_(policy.parameters(), cfg.policy_clip_grad)
            self.policy_opts[i].step()
            metrics[f"actor_loss/{i}"] = float(loss_i.detach())
            metrics[f"policy_old_kl/{i}"] = batch_policy_kl(policy, old, obs[i])

        metrics["policy_old_kl_mean"] = float(
            np.mean([metrics[f"policy_old_kl/{i}"] for i in range(self.spec.n_agents)])
        )
        for i, eps in enumerate(self.epsilon):
            metrics[f"epsilon/{i}"] = float(eps)
        return metrics

    def _optimizers(self):
        return [self.critic_opt, *self.policy_opts]

    def _finish_iteration(self, metrics: Dict[str, float]) -> None:
        self.snapshot.update_targets(mode="soft", tau=self.config.target_tau)
        self.iteration += 1
        if self.config.lr_decay:
            lr = self.config.adam_lr * (1.0 - self.config.lr_decay) ** self.iteration
            for opt in self._optimizers():
                for group in opt.param_groups:
                    group["lr"] = lr
