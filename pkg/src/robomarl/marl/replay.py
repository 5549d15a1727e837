"""Transition-level replay memory."""
from typing import Dict

import numpy as np

FIELDS = ("obs", "actions", "reward", "next_obs", "done", "state", "next_state")


class ReplayBuffer:
    """FIFO ring buffer of joint transitions."""

    def __init__(self, capacity: int, n_agents: int = 2, obs_size: int = 37):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self.obs = np.zeros((capacity, n_agents, obs_size))
        self.actions = np.zeros((capacity, n_agents), dtype=np.int64)
        self.reward = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, n_agents, obs_size))
        self.done = np.zeros(capacity)
        self.state = np.zeros((capacity, obs_size))
        self.next_state = np.zeros((capacity, obs_size))
        self.size = 0
        self.head = 0
        self.added = 0

    def __len__(self) -> int:
        return self.size

    def add(self, obs, actions, reward, next_obs, done, state=None, next_state=None):
        i = self.head
        self.obs[i] = obs
        self.actions[i] = actions
        self.reward[i] = reward
        self.next_obs[i] = next_obs
        self.done[i] = float(done)
        self.state[i] = obs[0] if state is None else state
        self.next_state[i] = next_obs[0] if next_state is None else next_state
        self.head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        self.added += 1

    def extend(self, transitions):
        for t in transitions:
            self.add(**t)

    def take(self, idx) -> Dict[str, np.ndarray]:
        return {f: getattr(self, f)[idx] for f in FIELDS}

    def sample(self, n: int, rng) -> Dict[str, np.ndarray]:
        """Uniform sample without replacement."""
        if n < 1:
            raise ValueError("sample size must be >= 1")
        if n > self.size:
            raise ValueError(f"cannot sample {n} transitions from {self.size}")
        return self.take(rng.choice(self.size, size=n, replace=False))
