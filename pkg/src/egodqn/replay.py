"""Prioritized experience replay with a replay-at-least-once guarantee.

Sampling works in two phases. Slots that have never been replayed are
taken first, oldest first. The rest of the batch is drawn without
replacement with probability proportional to priority. Importance weights
are inversely proportional to priority and normalized so the
lowest-priority sample in the batch gets weight 1.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

PRIORITY_FLOOR = 1e-3


@dataclass
class Batch:
    indices: np.ndarray
    generations: np.ndarray
    obs: dict
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: dict
    dones: np.ndarray
    weights: np.ndarray
    n_forced: int


class PrioritizedBuffer:
    """Fixed-capacity ring of transitions with per-slot priorities.

    ``views`` maps each observation name to its per-sample shape; every
    pushed transition must supply arrays for exactly those views.

    ``weighting="inverse"`` (default) uses w_i = min_j p_j / p_i over the
    batch. ``weighting="per"`` is the usual (N * P(i)) ** -beta scheme,
    kept for ablations only.
    """

    def __init__(self, capacity: int, views: dict, rng=None, dtype=np.float32,
                 priority_floor: float = PRIORITY_FLOOR, weighting: str = "inverse", beta: float = 0.4):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        if weighting not in ("inverse", "per"):
            raise ValueError(f"unknown weighting {weighting!r}")
        self.capacity = capacity
        self.views = {k: tuple(v) for k, v in views.items()}
        self.rng = rng if rng is not None else np.random.default_rng()
        self.priority_floor = priority_floor
        self.weighting = weighting
        self.beta = beta

        self.obs = {k: np.zeros((capacity,) + s, dtype=dtype) for k, s in self.views.items()}
        self.next_obs = {k: np.zeros((capacity,) + s, dtype=dtype) for k, s in self.views.items()}
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.dones = np.zeros(capacity, dtype=bool)
        self.priorities = np.zeros(capacity)
        self.replayed = np.zeros(capacity, dtype=bool)
        self.generation = np.zeros(capacity, dtype=np.int64)

        self._next = 0
        self.size = 0
        self.pushes = 0
        # never-replayed slots in insertion order (dicts keep order)
        self._pending: dict[int, None] = {}
        self.evicted_unreplayed = 0
        self.stale_updates = 0

    def __len__(self):
        return self.size

    @property
    def full(self) -> bool:
        return self.size == self.capacity

    @property
    def n_pending(self) -> int:
        return len(self._pending)

    def push(self, obs: dict, action: int, reward: float, next_obs: dict, done: bool) -> int:
        slot = self._next
        max_p = self.priorities[:self.size].max() if self.size else 1.0
        if self.size == self.capacity:
            if not self.replayed[slot]:
                self.evicted_unreplayed += 1
            self._pending.pop(slot, None)
        for k in self.views:
            self.obs[k][slot] = obs[k]
            self.next_obs[k][slot] = next_obs[k]
        self.actions[slot] = action
        self.rewards[slot] = reward
        self.dones[slot] = done
        self.priorities[slot] = max_p
        self.replayed[slot] = False
        self.pushes += 1
        self.generation[slot] = self.pushes
        self._pending[slot] = None
        self._next = (slot + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        return slot

    def sample(self, batch_size: int = 32) -> Batch:
        if self.size < batch_size:
            raise ValueError(f"buffer holds {self.size} transitions, need {batch_size}")
        forced = list(itertools.islice(self._pending, batch_size))
        rest = batch_size - len(forced)
        if rest:
            p = self.priorities[:self.size].copy()
            p[forced] = 0.0
            drawn = self.rng.choice(self.size, size=rest, replace=False, p=p / p.sum())
            idx = np.concatenate([np.array(forced, dtype=np.int64), drawn])
        else:
            idx = np.array(forced, dtype=np.int64)
        for slot in forced:
            del self._pending[slot]
        self.replayed[idx] = True

        p_batch = self.priorities[idx]
        if self.weighting == "inverse":
            weights = p_batch.min() / p_batch
        else:
            probs = p_batch / self.priorities[:self.size].sum()
            weights = (self.size * probs) ** -self.beta
            weights /= weights.max()
        return Batch(
            indices=idx,
            generations=self.generation[idx].copy(),
            obs={k: v[idx] for k, v in self.obs.items()},
            actions=self.actions[idx],
            rewards=self.rewards[idx],
            next_obs={k: v[idx] for k, v in self.next_obs.items()},
            dones=self.dones[idx],
            weights=weights,
            n_forced=len(forced),
        )

    def update_priorities(self, indices, td_errors, generations=None) -> None:
        indices = np.asarray(indices)
        new_p = np.abs(np.asarray(td_errors, dtype=float)) + self.priority_floor
        if generations is not None:
            live = self.generation[indices] == np.asarray(generations)
            self.stale_updates += int((~live).sum())
            indices, new_p = indices[live], new_p[live]
        self.priorities[indices] = new_p

    def sampling_probabilities(self) -> np.ndarray:
        """Proportional-draw probabilities over stored slots."""
        p = self.priorities[:self.size]
        return p / p.sum()
