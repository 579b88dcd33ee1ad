"""Experience replay."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Transition:
    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray
    terminal: bool


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions with a seeded sampler.

    Stored column-wise so a batch is a handful of fancy-index reads.
    """

    def __init__(self, capacity: int, obs_size: int, seed: int = 0):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_size))
        self.next_obs = np.zeros((capacity, obs_size))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.terminal = np.zeros(capacity, dtype=bool)
        self.rng = np.random.default_rng(seed)
        self._next = 0
        self.size = 0
        self.total_added = 0

    def __len__(self) -> int:
        return self.size

    def add(self, t: Transition) -> None:
        i = self._next
        self.obs[i] = t.obs
        self.next_obs[i] = t.next_obs
        self.actions[i] = t.action
        self.rewards[i] = t.reward
        self.terminal[i] = t.terminal
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        self.total_added += 1

    def oldest_index(self) -> int:
        return self._next if self.size == self.capacity else 0

    def get(self, k: int) -> Transition:
        """k-th oldest stored transition."""
        if not 0 <= k < self.size:
            raise IndexError(k)
        i = (self.oldest_index() + k) % self.capacity
        return Transition(self.obs[i].copy(), int(self.actions[i]), float(self.rewards[i]),
                          self.next_obs[i].copy(), bool(self.terminal[i]))

    def sample(self, batch: int):
        """Uniform sample without replacement (with replacement only if the buffer is smaller than the batch)."""
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = self.rng.choice(self.size, size=batch, replace=batch > self.size)
        return self.obs[idx], self.actions[idx], self.rewards[idx], self.next_obs[idx], self.terminal[idx]
