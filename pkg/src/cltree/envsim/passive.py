"""Passive (supervised) families: synthetic Gaussian clusters and split CSV datasets."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_SIGMA = 0.15
DEFAULT_DIM = 16
DEFAULT_CLASSES = 2
MIN_SEPARATION = 1.0


class DatasetError(ValueError):
    pass


def sample_prototypes(rng: np.random.Generator, classes: int = DEFAULT_CLASSES,
                      dim: int = DEFAULT_DIM) -> np.ndarray:
    """``classes`` unit-norm prototypes, pairwise at least ``MIN_SEPARATION`` apart."""
    protos: list[np.ndarray] = []
    while len(protos) < classes:
        v = rng.standard_normal(dim)
        v /= np.linalg.norm(v)
        if all(np.linalg.norm(v - p) >= MIN_SEPARATION for p in protos):
            protos.append(v)
    return np.stack(protos)


def sample_gaussian(context_values: np.ndarray, rng: np.random.Generator, n: int,
                    classes: int, sigma: float = DEFAULT_SIGMA):
    """Draw ``n`` points: a uniform local class, then prototype plus isotropic noise."""
    protos = np.asarray(context_values).reshape(classes, -1)
    local = rng.integers(classes, size=n)
    x = protos[local] + sigma * rng.standard_normal((n, protos.shape[1]))
    return x, local


def sample_passive(context, rng: np.random.Generator, n: int = 1, *,
                   classes: int = DEFAULT_CLASSES, sigma: float = DEFAULT_SIGMA,
                   disjoint_actions: bool = False, dataset=None):
    """Labeled batch for one context.

    With ``disjoint_actions`` the label is global (``task*classes + local``,
    class-incremental); otherwise it is the local class (domain-incremental).
    ``dataset`` switches to a split CSV pool indexed by the context's task.
    """
    if dataset is not None:
        task = context.task_index
        pool = dataset[task]
        rows = rng.integers(len(pool.y), size=n)
        x = pool.X[rows]
        local = pool.y[rows] - pool.class_offset
    else:
        x, local = sample_gaussian(context.values, rng, n, classes, sigma)
    if disjoint_actions:
        if context.task_index is None:
            raise ValueError("disjoint action spaces need a discrete task index")
        return x, context.task_index * classes + local
    return x, local


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    class_offset: int = 0

    def __len__(self):
        return len(self.y)


def load_csv_dataset(path: str | Path) -> Dataset:
    """Rows are ``label, feat_1, ..., feat_d``; labels must be 0..K-1."""
    labels, feats = [], []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                label = int(row[0])
                values = [float(c) for c in row[1:]]
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise DatasetError(f"{path}:{lineno}: malformed row (non-numeric field)") from None
            if not values:
                raise DatasetError(f"{path}:{lineno}: malformed row (no features)")
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise DatasetError(f"{path}:{lineno}: malformed row (expected {width} features, "
                                   f"got {len(values)})")
            labels.append(label)
            feats.append(values)
    if not labels:
        raise DatasetError(f"{path}: no data rows")
    y = np.asarray(labels, dtype=np.int64)
    k = int(y.max()) + 1
    if y.min() < 0 or set(np.unique(y)) != set(range(k)):
        raise DatasetError(f"{path}: labels must cover 0..K-1 without gaps")
    return Dataset(np.asarray(feats, dtype=np.float64), y)


def split_by_class(dataset: Dataset, n_tasks: int, seed: int = 0) -> list[Dataset]:
    """Task ``i`` gets classes ``[i*K/n, (i+1)*K/n)``; rows shuffled by ``seed``."""
    k = int(dataset.y.max()) + 1
    if n_tasks < 1 or k % n_tasks:
        raise DatasetError(f"number of classes K={k} is not divisible by n_tasks={n_tasks}")
    per = k // n_tasks
    order = np.random.default_rng(seed).permutation(len(dataset.y))
    X, y = dataset.X[order], dataset.y[order]
    out = []
    for i in range(n_tasks):
        sel = (y >= i * per) & (y < (i + 1) * per)
        out.append(Dataset(X[sel], y[sel], class_offset=i * per))
    return out


def train_test_split(task: Dataset, test_fraction: float = 0.2) -> tuple[Dataset, Dataset]:
    n_test = max(1, int(round(len(task) * test_fraction))) if len(task) > 1 else 0
    test = Dataset(task.X[:n_test], task.y[:n_test], task.class_offset)
    train = Dataset(task.X[n_test:], task.y[n_test:], task.class_offset)
    if len(test) == 0:
        test = train
    return train, test
