"""Cooperative partially-observable stochastic game interface."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np


class InvalidActionError(ValueError):
    """An agent supplied an action outside its action space."""


class UnsupportedOperationError(TypeError):
    """The operation is only defined for a different environment family."""


@dataclass(frozen=True)
class PosgSpec:
    """Static description of a cooperative POSG instance."""

    n_agents: int
    obs_dims: tuple
    n_actions: tuple
    horizon: int

    def __post_init__(self):
        if self.n_agents < 2:
            raise ValueError("a multi-agent game needs n_agents >= 2")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if len(self.obs_dims) != self.n_agents or len(self.n_actions) != self.n_agents:
            raise ValueError("obs_dims and n_actions must have one entry per agent")
        if any(a < 1 for a in self.n_actions):
            raise ValueError("every action space must be non-empty")


@dataclass(frozen=True)
class CouplingGraph:
    """Symmetric boolean adjacency saying whose reward depends on whom."""

    adjacency: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError("adjacency must be square")
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")
        if not np.all(np.diag(adj)):
            raise ValueError("every agent depends on itself")
        object.__setattr__(self, "adjacency", adj)

    @property
    def n_agents(self) -> int:
        return self.adjacency.shape[0]

    def partners(self, i: int) -> np.ndarray:
        """Indices of agents coupled to i, including i itself."""
        return np.flatnonzero(self.adjacency[i])

    @classmethod
    def full(cls, n: int) -> "CouplingGraph":
        return cls(np.ones((n, n), dtype=bool))

    @classmethod
    def separate(cls, n: int) -> "CouplingGraph":
        return cls(np.eye(n, dtype=bool))

    @classmethod
    def pairs(cls, n: int, pairs: Sequence[tuple]) -> "CouplingGraph":
        adj = np.eye(n, dtype=bool)
        for i, j in pairs:
            adj[i, j] = adj[j, i] = True
        return cls(adj)


@dataclass
class TransitionRecord:
    """One environment step for all agents; the replay-buffer unit."""

    obs: List[np.ndarray]
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: List[np.ndarray]
    dones: np.ndarray

    def __post_init__(self):
        n = len(self.obs)
        lengths = (len(self.actions), len(self.rewards), len(self.next_obs), len(self.dones))
        if any(length != n for length in lengths):
            raise ValueError(f"per-agent fields disagree on agent count: {(n,) + lengths}")


class Env:
    """Base class for the bundled environments.

    One instance is single-threaded; parallel rollouts use independent
    instances. reset(seed) must be deterministic in the seed, and step must
    reject invalid actions with a diagnostic naming the offending agent.
    """

    spec: PosgSpec
    coupling: CouplingGraph

    def reset(self, seed=None) -> List[np.ndarray]:
        raise NotImplementedError

    def step(self, actions):
        raise NotImplementedError

    def transition_distribution(self, *actions) -> np.ndarray:
        raise UnsupportedOperationError(
            f"{type(self).__name__} has no exact transition distribution; "
            "only the tabular game supports this"
        )

    def _validate_actions(self, actions) -> np.ndarray:
        actions = np.asarray(actions)
        if actions.shape != (self.spec.n_agents,):
            raise InvalidActionError(
                f"expected one action per agent ({self.spec.n_agents}), got shape {actions.shape}"
            )
        for i, (a, n) in enumerate(zip(actions, self.spec.n_actions)):
            if not (np.issubdtype(actions.dtype, np.integer) and 0 <= a < n):
                raise InvalidActionError(
                    f"agent {i}: action {a!r} invalid for discrete space of size {n}"
                )
        return actions.astype(np.int64)

    def _seeded_rng(self, seed) -> None:
        if seed is not None:
            if not (isinstance(seed, (int, np.integer)) and seed >= 0):
                raise ValueError(f"seed must be a non-negative integer, got {seed!r}")
            self._rng = np.random.default_rng(int(seed))
