"""Exact KL-divergence computations over finite discrete distributions.

Everything here works on plain numpy arrays and enumerates action spaces
exactly: no sampling, no network evaluation. These functions double as the
oracles that the ``verify-theorems`` suite and the learners' logged
divergence statistics are checked against. All divergences are in nats.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

DEFAULT_ENUMERATION_CAP = 10**6

_SUM_TOL = 1e-10


class DivergenceError(ValueError):
    """Raised when a divergence is mathematically undefined for the inputs."""


class EnumerationCapExceeded(RuntimeError):
    """Raised when a joint action space is too large to enumerate exactly."""


def _as_distribution(p, name: str) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError(f"{name} must be a 1-D probability vector, got shape {p.shape}")
    if np.any(p < 0):
        raise DivergenceError(f"{name} has negative entries")
    total = p.sum()
    if not np.isclose(total, 1.0, rtol=0, atol=_SUM_TOL):
        raise DivergenceError(f"{name} sums to {total!r}, not 1")
    return p


def kl(p, q) -> float:
    """KL(p || q) = sum_x p(x) log(p(x)/q(x)) for distributions on one support.

    Terms with p(x) = 0 contribute zero. If q(x) = 0 anywhere p(x) > 0 the
    divergence is undefined and a DivergenceError is raised instead of
    returning infinity.
    """
    p = _as_distribution(p, "p")
    q = _as_distribution(q, "q")
    if p.shape != q.shape:
        raise DivergenceError(f"support mismatch: {p.shape} vs {q.shape}")
    support = p > 0
    if np.any(q[support] == 0):
        raise DivergenceError("q vanishes on the support of p; KL(p||q) undefined")
    return float(np.sum(p[support] * np.log(p[support] / q[support])))


def joint_product(dists: Sequence[np.ndarray]) -> np.ndarray:
    """Full joint distribution of independent per-agent distributions.

    Returns an array of shape (A_1, ..., A_n); entry [a_1, ..., a_n] is the
    product of the per-agent probabilities.
    """
    arrays = [np.asarray(d, dtype=np.float64) for d in dists]
    return reduce(np.multiply.outer, arrays)


def joint_kl_exact(
    dists,
    dists_old,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> float:
    """KL between two factored joint action distributions by full enumeration.

    ``dists`` and ``dists_old`` are sequences of per-agent action
    distributions, already evaluated at the joint observation of interest.
    The joint is materialised over every joint action, so this is the slow,
    trustworthy path; it refuses (EnumerationCapExceeded) when the product
    space exceeds ``cap``.
    """
    if len(dists) != len(dists_old):
        raise ValueError("need one old distribution per agent")
    sizes = [len(d) for d in dists]
    n_joint = int(np.prod(sizes))
    if n_joint > cap:
        raise EnumerationCapExceeded(
            f"joint action space has {n_joint} elements, cap is {cap}; "
            "use the mean-field estimate instead"
        )
    p = joint_product([_as_distribution(d, f"agent {i} dist") for i, d in enumerate(dists)])
    q = joint_product(
        [_as_distribution(d, f"agent {i} old dist") for i, d in enumerate(dists_old)]
    )
    return kl(p.ravel(), q.ravel())


def joint_kl_meanfield(dists_batch, dists_old_batch) -> float:
    """Sum over agents of batch-averaged local KL divergences.

    ``dists_batch[i]`` is a (B, A_i) array of agent i's action distributions
    over a batch of local observations; ``dists_old_batch`` matches. Under a
    factored joint policy this equals the expected joint KL, which is what
    makes the sum a usable stand-in when enumeration is too expensive.
    """
    if len(dists_batch) != len(dists_old_batch):
        raise ValueError("need one old batch per agent")
    total = 0.0
    for i, (batch, batch_old) in enumerate(zip(dists_batch, dists_old_batch)):
        batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
        batch_old = np.atleast_2d(np.asarray(batch_old, dtype=np.float64))
        if batch.shape != batch_old.shape:
            raise DivergenceError(f"agent {i}: batch shape mismatch")
        if batch.shape[0] == 0:
            raise ValueError(f"agent {i}: empty observation batch")
        total += float(
            np.mean([kl(row, row_old) for row, row_old in zip(batch, batch_old)])
        )
    return total


def others_joint_kl(dists, dists_old, exclude: int) -> float:
    """KL of the joint distribution of every agent except ``exclude``."""
    n = len(dists)
    if not 0 <= exclude < n:
        raise IndexError(f"excluded agent {exclude} out of range for n={n}")
    if n == 1:
        return 0.0
    rest = [d for i, d in enumerate(dists) if i != exclude]
    rest_old = [d for i, d in enumerate(dists_old) if i != exclude]
    return joint_kl_exact(rest, rest_old)


def marginalize_out(joint: np.ndarray, agent: int) -> np.ndarray:
    """Marginal joint distribution of all agents except ``agent``."""
    return joint.sum(axis=agent)


def joint_bound_margin(joint_p: np.ndarray, joint_q: np.ndarray) -> float:
    """Margin of the joint-divergence upper bound on the average others-KL.

    Returns KL(joint_p || joint_q) minus the average, over agents i, of the
    KL between the two joints with agent i's action marginalised out. The
    chain rule for KL makes this non-negative for any pair of joints over
    the same product action space, factored or correlated; a negative margin
    (beyond numerical noise) would falsify the decomposition bound.
    """
    joint_p = np.asarray(joint_p, dtype=np.float64)
    joint_q = np.asarray(joint_q, dtype=np.float64)
    if joint_p.shape != joint_q.shape:
        raise DivergenceError("joint distributions must share a product action space")
    n = joint_p.ndim
    full = kl(joint_p.ravel(), joint_q.ravel())
    others = [
        kl(marginalize_out(joint_p, i).ravel(), marginalize_out(joint_q, i).ravel())
        for i in range(n)
    ]
    return full - float(np.mean(others))


def transition_kl(game, m: float, action: int) -> float:
    """Divergence of the one-step dynamics seen by agent 1 of a tabular game.

    Agent 2's policy moves from (m, 1-m) to (m/2, 1-m/2); the induced
    next-state distribution for agent 1's fixed ``action`` is obtained by
    exact marginalisation over agent 2's action, and the KL between the two
    induced distributions is returned.
    """
    if not 0.0 < m < 1.0:
        raise ValueError(f"m must lie in (0, 1), got {m}")
    n = m / 2.0
    p = _marginal_dynamics(game, action, np.array([m, 1.0 - m]))
    q = _marginal_dynamics(game, action, np.array([n, 1.0 - n]))
    return kl(p, q)


def _marginal_dynamics(game, action: int, other_policy: np.ndarray) -> np.ndarray:
    dists = np.stack(
        [game.transition_distribution(action, a2) for a2 in range(len(other_policy))]
    )
    return other_policy @ dists


@dataclass(frozen=True)
class StationarityReport:
    """Per-agent bounds on the drift of each agent's effective dynamics.

    ``delta_i[i]`` is the max over (state, own action, consecutive policy
    pair) of the induced transition KL: the tightest uniform bound the
    observed policy sequence satisfies. ``mean_delta_i`` aggregates the same
    divergences by averaging instead, for consumers that want an
    expectation-style summary rather than a worst case. ``delta`` is the
    arithmetic mean of ``delta_i`` across agents.
    """

    delta_i: np.ndarray
    mean_delta_i: np.ndarray

    @property
    def delta(self) -> float:
        return float(np.mean(self.delta_i))

    @property
    def mean_delta(self) -> float:
        return float(np.mean(self.mean_delta_i))


def stationarity_report(game, policy_sequence) -> StationarityReport:
    """Measure the dynamics drift a policy sequence induces in a tabular game.

    ``policy_sequence`` is a list of length >= 2; each element holds one
    action distribution per agent (at the game's sole non-absorbing state).
    For every consecutive pair and every agent i, the other agent's policy
    change induces a change in i's one-step dynamics; the report collects
    the max and mean of those divergences per agent.
    """
    if len(policy_sequence) < 2:
        raise ValueError("need at least two consecutive policies")
    n_agents = len(policy_sequence[0])
    if n_agents != 2:
        raise ValueError("tabular stationarity analysis covers 2-agent games")
    worst = np.zeros(n_agents)
    sums = np.zeros(n_agents)
    count = 0
    for cur, nxt in zip(policy_sequence[:-1], policy_sequence[1:]):
        count += 1
        for i in range(n_agents):
            other = 1 - i
            for action in range(game.n_actions(i)):
                p = _induced_dynamics(game, i, action, np.asarray(cur[other], dtype=np.float64))
                q = _induced_dynamics(game, i, action, np.asarray(nxt[other], dtype=np.float64))
                d = kl(p, q)
                worst[i] = max(worst[i], d)
                sums[i] += d / game.n_actions(i)
    return StationarityReport(delta_i=worst, mean_delta_i=sums / count)


def _induced_dynamics(game, agent: int, action: int, other_policy: np.ndarray) -> np.ndarray:
    if agent == 0:
        dists = np.stack(
            [game.transition_distribution(action, a2) for a2 in range(game.n_actions(1))]
        )
    else:
        dists = np.stack(
            [game.transition_distribution(a1, action) for a1 in range(game.n_actions(0))]
        )
    return other_policy @ dists
