from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError


@dataclass
class Batch:
    obs: np.ndarray  # (B, N, obs_dim)
    act: np.ndarray  # (B, N, act_dim)
    rew: np.ndarray  # (B, N)
    next_obs: np.ndarray  # (B, N, obs_dim)
    done: np.ndarray  # (B,)

    def __len__(self):
        return len(self.rew)


class ReplayBuffer:
    """Bounded FIFO of joint transitions with uniform sampling (with replacement)."""

    def __init__(self, capacity: int, n_agents: int, obs_dim: int, act_dim: int):
        if capacity < 1:
            raise ContractError("capacity must be positive")
        self.capacity = int(capacity)
        self.obs = np.zeros((capacity, n_agents, obs_dim))
        self.act = np.zeros((capacity, n_agents, act_dim))
        self.rew = np.zeros((capacity, n_agents))
        self.next_obs = np.zeros((capacity, n_agents, obs_dim))
        self.done = np.zeros(capacity)
        self.size = 0
        self._head = 0

    def __len__(self):
        return self.size

    def add(self, obs, act, rew, next_obs, done) -> None:
        n = self.rew.shape[1]
        if not (len(obs) == len(act) == len(rew) == len(next_obs) == n):
            raise ContractError(f"transition arities must all equal {n}")
        i = self._head
        self.obs[i] = obs
        self.act[i] = act
        self.rew[i] = rew
        self.next_obs[i] = next_obs
        self.done[i] = float(done)
        self._head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        if self.size < batch_size:
            raise ContractError(f"buffer holds {self.size} transitions, batch needs {batch_size}")
        return rng.integers(0, self.size, batch_size)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        idx = self.sample_indices(batch_size, rng)
        return Batch(self.obs[idx], self.act[idx], self.rew[idx], self.next_obs[idx], self.done[idx])
