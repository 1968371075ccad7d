"""FIFO replay buffer over multi-agent transition records."""

from __future__ import annotations

from typing import List, Optional

import numpy as np

from .envs.base import TransitionRecord


class ReplayBuffer:
    """Ring buffer of per-agent transitions with uniform batch sampling.

    Arrays are allocated lazily from the first record's shapes. Sampling is
    uniform without replacement within a draw (shuffled transitions).
    """

    def __init__(self, capacity: int, rng: Optional[np.random.Generator] = None):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self._rng = rng if rng is not None else np.random.default_rng(0)
        self._ptr = 0
        self._size = 0
        self._obs: List[np.ndarray] | None = None
        self._next_obs: List[np.ndarray] | None = None
        self._actions: np.ndarray | None = None
        self._rewards: np.ndarray | None = None
        self._dones: np.ndarray | None = None

    def __len__(self) -> int:
        return self._size

    @property
    def n_agents(self) -> int:
        if self._obs is None:
            raise RuntimeError("buffer is empty")
        return len(self._obs)

    def _allocate(self, record: TransitionRecord) -> None:
        n = len(record.obs)
        self._obs = [np.empty((self.capacity, len(o)), dtype=np.float64) for o in record.obs]
        self._next_obs = [
            np.empty((self.capacity, len(o)), dtype=np.float64) for o in record.next_obs
        ]
        self._actions = np.empty((self.capacity, n), dtype=np.int64)
        self._rewards = np.empty((self.capacity, n), dtype=np.float64)
        self._dones = np.empty((self.capacity, n), dtype=bool)

    def add(self, record: TransitionRecord) -> None:
        if self._obs is None:
            self._allocate(record)
        i = self._ptr
        for a, (o, o2) in enumerate(zip(record.obs, record.next_obs)):
            self._obs[a][i] = o
            self._next_obs[a][i] = o2
        self._actions[i] = record.actions
        self._rewards[i] = record.rewards
        self._dones[i] = record.dones
        self._ptr = (self._ptr + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int) -> dict:
        if batch_size > self._size:
            raise ValueError(f"cannot draw {batch_size} from buffer of size {self._size}")
        idx = self._rng.choice(self._size, size=batch_size, replace=False)
        return {
            "obs": [buf[idx] for buf in self._obs],
            "next_obs": [buf[idx] for buf in self._next_obs],
            "actions": self._actions[idx],
            "rewards": self._rewards[idx],
            "dones": self._dones[idx],
        }

    def newest(self) -> TransitionRecord:
        if self._size == 0:
            raise RuntimeError("buffer is empty")
        i = (self._ptr - 1) % self.capacity
        return TransitionRecord(
            obs=[buf[i].copy() for buf in self._obs],
            actions=self._actions[i].copy(),
            rewards=self._rewards[i].copy(),
            next_obs=[buf[i].copy() for buf in self._next_obs],
            dones=self._dones[i].copy(),
        )

    def contains_reward(self, value: float) -> bool:
        """True if any stored (non-evicted) transition carries this reward value."""
        if self._size == 0:
            return False
        return bool(np.any(np.isclose(self._rewards[: self._size], value)))
