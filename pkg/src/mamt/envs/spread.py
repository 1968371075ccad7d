"""Cooperative-navigation particle environments with configurable coupling.

Agents move on a bounded 2-D arena trying to cover landmarks. The reward
coupling graph decides which agents share distance/collision terms, which
is what distinguishes the three-agent variants:

* ``separate``: every agent only cares about its own assigned landmark and
  never incurs collision penalties.
* ``mixed``: agents 0 and 2 share their two landmarks and collision
  penalties; agent 1 is on its own.
* ``full``: the classic setting, all landmarks shared by all agents.

Defaults not fixed by the task family (arena size, movement step, collision
radius) are module constants below, documented as choices.
"""

from __future__ import annotations

import numpy as np

from .base import Env, PosgSpec, CouplingGraph

ARENA_HALF_WIDTH = 1.0
MOVE_STEP = 0.1
AGENT_RADIUS = 0.1
COLLISION_DISTANCE = 2 * AGENT_RADIUS
N_ACTIONS = 5  # no-op, +x, -x, +y, -y

_ACTION_DELTAS = np.array(
    [[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]
) * MOVE_STEP


class SpreadEnv(Env):
    """N agents, N landmarks, discrete movement, coupled cooperative rewards."""

    def __init__(self, n_agents: int = 2, coupling: CouplingGraph | None = None,
                 horizon: int = 25):
        if coupling is None:
            coupling = CouplingGraph.full(n_agents)
        if coupling.n_agents != n_agents:
            raise ValueError("coupling graph size must match n_agents")
        obs_dim = 4 * n_agents  # self pos + relative others + relative landmarks
        self.spec = PosgSpec(
            n_agents=n_agents,
            obs_dims=(obs_dim,) * n_agents,
            n_actions=(N_ACTIONS,) * n_agents,
            horizon=horizon,
        )
        self.coupling = coupling
        self.n_landmarks = n_agents
        self._rng = np.random.default_rng(0)
        self._agent_pos = np.zeros((n_agents, 2))
        self._landmark_pos = np.zeros((n_agents, 2))
        self._t = 0
        self._done = True

    def reset(self, seed=None):
        self._seeded_rng(seed)
        n = self.spec.n_agents
        self._agent_pos = self._rng.uniform(-ARENA_HALF_WIDTH, ARENA_HALF_WIDTH, (n, 2))
        self._landmark_pos = self._rng.uniform(
            -ARENA_HALF_WIDTH, ARENA_HALF_WIDTH, (self.n_landmarks, 2)
        )
        self._t = 0
        self._done = False
        return self._observations()

    def step(self, actions):
        if self._done:
            raise RuntimeError("episode terminated; call reset() first")
        actions = self._validate_actions(actions)
        self._agent_pos = np.clip(
            self._agent_pos + _ACTION_DELTAS[actions],
            -ARENA_HALF_WIDTH,
            ARENA_HALF_WIDTH,
        )
        self._t += 1
        rewards = self._rewards()
        self._done = self._t >= self.spec.horizon
        dones = np.full(self.spec.n_agents, self._done)
        return self._observations(), rewards, dones

    def _rewards(self) -> np.ndarray:
        """Coupled distance coverage plus local collision penalties.

        Each agent's reward uses only positions of its coupling-graph
        partners: the landmarks assigned to the partner group must be
        covered by the group (sum of min distances), and each colliding
        partner pair costs 1.
        """
        n = self.spec.n_agents
        rewards = np.zeros(n)
        for i in range(n):
            group = self.coupling.partners(i)
            dist = 0.0
            for lm in group:  # landmark g is assigned to agent g
                gaps = np.linalg.norm(
                    self._agent_pos[group] - self._landmark_pos[lm], axis=1
                )
                dist -= gaps.min()
            collisions = 0
            for j in group:
                if j == i:
                    continue
                if np.linalg.norm(self._agent_pos[i] - self._agent_pos[j]) < COLLISION_DISTANCE:
                    collisions += 1
            rewards[i] = dist - collisions
        return rewards

    def _observations(self):
        obs = []
        for i in range(self.spec.n_agents):
            me = self._agent_pos[i]
            others = np.delete(self._agent_pos, i, axis=0) - me
            landmarks = self._landmark_pos - me
            obs.append(np.concatenate([me, others.ravel(), landmarks.ravel()]))
        return obs

    @property
    def agent_positions(self) -> np.ndarray:
        return self._agent_pos.copy()

    @property
    def landmark_positions(self) -> np.ndarray:
        return self._landmark_pos.copy()
