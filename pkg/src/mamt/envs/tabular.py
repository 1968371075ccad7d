"""Three-state, two-agent tabular Markov game with exact dynamics.

The game starts in s0 and moves to one of two absorbing states in a single
step; the transition tensor is known in closed form, which makes it the
target for the exact-divergence oracles.
"""

from __future__ import annotations

import numpy as np

from .base import Env, InvalidActionError, PosgSpec, CouplingGraph

_ROW_TOL = 1e-12

# p(s1 | a1, a2, s0); p(s2 | ...) is the complement.
_P_S1 = np.array([[0.4, 0.2], [0.5, 0.7]])


class TabularGame(Env):
    """Enumerable two-agent game used to validate divergence computations."""

    N_STATES = 3

    def __init__(self, p_s1: np.ndarray | None = None):
        p_s1 = _P_S1 if p_s1 is None else np.asarray(p_s1, dtype=np.float64)
        if p_s1.shape != (2, 2):
            raise ValueError("transition table must be 2x2 (agent-1 action x agent-2 action)")
        rows = np.stack([p_s1, 1.0 - p_s1], axis=-1)
        if np.any(np.abs(rows.sum(axis=-1) - 1.0) > _ROW_TOL):
            raise ValueError("transition rows must sum to 1")
        if np.any((rows < 0) | (rows > 1)):
            raise ValueError("transition probabilities must lie in [0, 1]")
        self._p_s1 = p_s1
        self.spec = PosgSpec(n_agents=2, obs_dims=(3, 3), n_actions=(2, 2), horizon=1)
        self.coupling = CouplingGraph.full(2)
        self._rng = np.random.default_rng(0)
        self._state = 0
        self._done = True

    def n_actions(self, agent: int) -> int:
        return self.spec.n_actions[agent]

    def reset(self, seed=None):
        self._seeded_rng(seed)
        self._state = 0
        self._done = False
        return self._observations()

    def step(self, actions):
        if self._done:
            raise RuntimeError("episode terminated; call reset() first")
        a1, a2 = self._validate_actions(actions)
        probs = self.transition_distribution(a1, a2)
        self._state = 1 + int(self._rng.random() >= probs[0])
        self._done = True
        rewards = np.zeros(2)
        dones = np.array([True, True])
        return self._observations(), rewards, dones

    def transition_distribution(self, a1: int, a2: int) -> np.ndarray:
        """Exact next-state distribution over {s1, s2} from s0."""
        for name, a in (("agent 0", a1), ("agent 1", a2)):
            if a not in (0, 1):
                raise InvalidActionError(f"{name}: action {a!r} invalid for 2-action space")
        p1 = self._p_s1[a1, a2]
        return np.array([p1, 1.0 - p1])

    def _observations(self):
        onehot = np.zeros(self.N_STATES)
        onehot[self._state] = 1.0
        return [onehot.copy(), onehot.copy()]


def paired_policies(m: float):
    """The (m, 1-m) vs (m/2, 1-m/2) policy pair used in the drift analysis."""
    if not 0.0 < m < 1.0:
        raise ValueError(f"m must lie in (0, 1), got {m}")
    n = m / 2.0
    return np.array([m, 1.0 - m]), np.array([n, 1.0 - n])
