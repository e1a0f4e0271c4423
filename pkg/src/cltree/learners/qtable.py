"""Tabular action values for the active branch."""

from __future__ import annotations

import numpy as np

from .. import kernels


class IdentityKey:
    """States that are already hashable (ints, tuples)."""

    def __call__(self, x):
        return x

    def to_dict(self):
        return {"type": "identity"}


class BinKey:
    """Mixed-radix index of per-dimension bins; ``edges[d]`` are interior edges."""

    def __init__(self, edges):
        self.edges = np.ascontiguousarray(edges, dtype=np.float64)

    def __call__(self, x):
        return kernels.discretize(np.ascontiguousarray(x, dtype=np.float64), self.edges)

    def to_dict(self):
        return {"type": "bins", "edges": self.edges.tolist()}


class ExactKey:
    """Binary observations keyed by the positions of their ones."""

    def __call__(self, x):
        return np.flatnonzero(np.asarray(x)).tobytes()

    def to_dict(self):
        return {"type": "exact"}


class QTable:
    """Value estimates and visit counts, one row per discretized state.

    Rows are allocated on first sight of a state; values start at zero.
    """

    def __init__(self, n_actions: int, key=None, capacity: int = 256):
        self.n_actions = n_actions
        self.key = key or IdentityKey()
        self.rows: dict = {}
        self.values = np.zeros((capacity, n_actions))
        self.counts = np.zeros((capacity, n_actions), dtype=np.int64)

    def __len__(self):
        return len(self.rows)

    def index(self, x) -> int:
        k = self.key(x)
        row = self.rows.get(k)
        if row is None:
            row = len(self.rows)
            if row >= self.values.shape[0]:
                self._grow()
            self.rows[k] = row
        return row

    def _grow(self):
        cap = self.values.shape[0]
        self.values = np.ascontiguousarray(np.vstack([self.values, np.zeros_like(self.values)]))
        self.counts = np.ascontiguousarray(np.vstack([self.counts, np.zeros_like(self.counts)]))
        assert self.values.shape[0] == 2 * cap

    def q(self, row: int) -> np.ndarray:
        return self.values[row]

    def greedy(self, row: int) -> int:
        return kernels.greedy_action(self.values, row)

    def copy(self) -> "QTable":
        t = QTable(self.n_actions, self.key, 1)
        t.rows = dict(self.rows)
        t.values = self.values.copy()
        t.counts = self.counts.copy()
        return t

    def to_dict(self) -> dict:
        n = len(self.rows)
        keys = sorted(self.rows.items(), key=lambda kv: kv[1])
        return {"n_actions": self.n_actions, "key": self.key.to_dict(),
                "states": [k.hex() if isinstance(k, bytes) else k for k, _ in keys],
                "values": self.values[:n].tolist(), "counts": self.counts[:n].tolist()}


def q_update(table: QTable, s: int, a: int, r: float, s2: int, done: bool, lr: float,
             gamma: float) -> float:
    """One Q-learning backup on rows ``s``/``s2``; returns the new ``Q(s, a)``."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    return kernels.q_update(table.values, table.counts, s, a, float(r), s2, bool(done),
                            float(lr), float(gamma))


def q_update_batch(table: QTable, s, a, r, s2, done, lr: float, gamma: float) -> None:
    kernels.q_update_batch(table.values, table.counts,
                           np.ascontiguousarray(s, dtype=np.int64),
                           np.ascontiguousarray(a, dtype=np.int64),
                           np.ascontiguousarray(r, dtype=np.float64),
                           np.ascontiguousarray(s2, dtype=np.int64),
                           np.ascontiguousarray(done, dtype=np.uint8), float(lr), float(gamma))


def greedy(values: np.ndarray) -> int:
    """Argmax with ties broken toward the lowest index."""
    return int(np.argmax(values))


def epsilon_greedy(values, epsilon: float, rng: np.random.Generator) -> int:
    """Uniform action with probability ``epsilon``, else :func:`greedy`.

    Always consumes exactly one uniform draw (plus one integer draw when
    exploring), so the RNG stream does not depend on the values.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    values = np.asarray(values)
    if rng.random() < epsilon:
        return int(rng.integers(values.shape[-1]))
    return greedy(values)
