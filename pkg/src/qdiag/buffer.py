"""Transition batches and a fixed-capacity ring replay buffer."""
from dataclasses import dataclass

import numpy as np

from qdiag.errors import ConfigurationError


@dataclass
class Transitions:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray

    def __len__(self):
        return len(self.states)

    def take(self, idx):
        return Transitions(self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx])

    def targets(self, q_table, discount):
        """Sampled backups ``r + gamma * max_a' Q(s', a')``."""
        return self.rewards + discount * q_table[self.next_states].max(axis=1)

    @classmethod
    def concat(cls, parts):
        return cls(*(np.concatenate([getattr(p, f) for p in parts])
                     for f in ("states", "actions", "rewards", "next_states")))


class ReplayBuffer:
    """Ring buffer of ``(s, a, r, s')``; the oldest entries are overwritten first."""

    def __init__(self, capacity, num_states=None):
        if capacity < 1:
            raise ConfigurationError("buffer capacity must be at least 1")
        self.capacity = capacity
        self.num_states = num_states
        self._s = np.zeros(capacity, dtype=np.int64)
        self._a = np.zeros(capacity, dtype=np.int64)
        self._r = np.zeros(capacity)
        self._s2 = np.zeros(capacity, dtype=np.int64)
        self.size = 0
        self.inserted = 0

    def __len__(self):
        return self.size

    def add(self, batch):
        if self.num_states is not None and len(batch) and (
                max(batch.states.max(), batch.next_states.max()) >= self.num_states
                or min(batch.states.min(), batch.next_states.min()) < 0):
            raise ConfigurationError("transition references an invalid state")
        for i in range(len(batch)):
            j = self.inserted % self.capacity
            self._s[j] = batch.states[i]
            self._a[j] = batch.actions[i]
            self._r[j] = batch.rewards[i]
            self._s2[j] = batch.next_states[i]
            self.inserted += 1
        self.size = min(self.inserted, self.capacity)

    def contents(self):
        n = self.size
        return Transitions(self._s[:n].copy(), self._a[:n].copy(), self._r[:n].copy(), self._s2[:n].copy())

    def sample(self, n, rng, probs=None):
        """Draw ``n`` transitions with replacement, uniformly or with ``probs`` over slots."""
        if self.size == 0:
            raise ConfigurationError("cannot sample from an empty buffer")
        if probs is None:
            idx = rng.integers(0, self.size, size=n)
        else:
            idx = rng.choice(self.size, size=n, p=probs)
        return self.contents().take(idx), idx

    def pair_frequencies(self, num_states, num_actions):
        """Empirical state-action distribution of the stored transitions."""
        freq = np.zeros((num_states, num_actions))
        np.add.at(freq, (self._s[:self.size], self._a[:self.size]), 1.0)
        return freq / max(self.size, 1)
