from __future__ import annotations

import numpy as np


class ReplayBuffer:
    """Fixed-capacity reservoir: every item seen so far is retained with equal probability."""

    def __init__(self, capacity: int):
        if capacity <= 0:
            raise ValueError("replay capacity must be positive")
        self.capacity = capacity
        self.items: list = []
        self.seen = 0

    def __len__(self):
        return len(self.items)

    def insert(self, item, rng: np.random.Generator) -> None:
        if len(self.items) < self.capacity:
            self.items.append(item)
        else:
            j = int(rng.integers(self.seen + 1))
            if j < self.capacity:
                self.items[j] = item
        self.seen += 1

    def sample(self, n: int, rng: np.random.Generator) -> list:
        if not self.items:
            raise ValueError("cannot sample from an empty replay buffer")
        if n > len(self.items):
            raise ValueError(f"asked for {n} items, buffer holds {len(self.items)}")
        idx = rng.choice(len(self.items), size=n, replace=False)
        return [self.items[i] for i in idx]


def replay_insert(buffer: ReplayBuffer, item, rng) -> None:
    buffer.insert(item, rng)


def replay_sample(buffer: ReplayBuffer, n: int, rng) -> list:
    return buffer.sample(n, rng)
