"""Registry of environment families and their task samplers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..taxonomy import Branch
from . import cartpole, gridworld, passive


@dataclass(frozen=True)
class Family:
    name: str
    branch: Branch
    continuous_tasks: bool
    sampler: Callable[..., np.ndarray]
    description: str = ""

    def sample_task(self, rng: np.random.Generator, task: int, **params) -> np.ndarray:
        return self.sampler(rng, task, **params)


def _gaussian_task(rng, task, classes_per_task=passive.DEFAULT_CLASSES,
                   observation_dim=passive.DEFAULT_DIM, **_):
    return passive.sample_prototypes(rng, classes_per_task, observation_dim).ravel()


def _csv_task(rng, task, **_):
    return np.array([float(task)])


def _cartpole_task(rng, task, **_):
    # task 0 keeps the textbook constants; later tasks rescale them
    if task == 0:
        return cartpole.IDENTITY.copy()
    return cartpole.sample_task_cartpole(rng).values


def _grid_task(rng, task, n_layouts=None, **_):
    n = n_layouts or len(gridworld.default_layouts())
    return np.array([float(task % n)])


FAMILIES: dict[str, Family] = {
    "synthetic_gaussian": Family(
        "synthetic_gaussian", Branch.PASSIVE, True, _gaussian_task,
        "Gaussian clusters around per-task class prototypes (Split-Synthetic)"),
    "split_csv": Family(
        "split_csv", Branch.PASSIVE, False, _csv_task,
        "user CSV dataset split into tasks by class"),
    "cartpole": Family(
        "cartpole", Branch.ACTIVE, True, _cartpole_task,
        "cart-pole with per-task gravity/mass/length multipliers"),
    "gridworld": Family(
        "gridworld", Branch.ACTIVE, False, _grid_task,
        "gridworld whose layout (walls, coins, goal) is the task"),
}


def get_family(name: str) -> Family:
    try:
        return FAMILIES[name]
    except KeyError:
        raise ValueError(f"unknown environment family {name!r}; "
                         f"known: {', '.join(FAMILIES)}") from None
