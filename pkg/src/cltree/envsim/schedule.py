"""Context schedules: the realization of the context chain p(z'|z)."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .._seeding import make_rng


class ScheduleKind(str, enum.Enum):
    CONTINUOUS_DRIFT = "continuous_drift"
    DISCRETE_CHAIN = "discrete_chain"
    INCREMENTAL_SEQUENCE = "incremental_sequence"
    STATIONARY_MIXTURE = "stationary_mixture"
    SINGLE_TASK = "single_task"

    @property
    def stationary(self) -> bool:
        return self in (ScheduleKind.STATIONARY_MIXTURE, ScheduleKind.SINGLE_TASK)


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ContextVector:
    values: np.ndarray
    task_index: int | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise ScheduleError("context values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __eq__(self, other):
        return (isinstance(other, ContextVector) and self.task_index == other.task_index
                and np.array_equal(self.values, other.values))

    __hash__ = None


@dataclass(eq=False)
class ContextSchedule:
    kind: ScheduleKind
    num_tasks: int
    steps_per_phase: int
    anchors: list[ContextVector]
    transition: np.ndarray | None = None
    seed: int = 0
    phase_tasks: list[int] = field(default_factory=list)

    @property
    def num_phases(self) -> int:
        return 1 if self.kind.stationary else self.num_tasks

    @property
    def total_steps(self) -> int:
        if self.kind is ScheduleKind.SINGLE_TASK:
            return self.steps_per_phase
        return self.num_tasks * self.steps_per_phase

    def phase_of(self, step: int) -> int:
        return min(step // self.steps_per_phase, self.num_phases - 1) if not self.kind.stationary else 0

    def task_at(self, step: int) -> int | None:
        """Discrete task index in effect at ``step`` (``None`` under drift)."""
        kind = self.kind
        if kind is ScheduleKind.CONTINUOUS_DRIFT:
            return None
        if kind is ScheduleKind.SINGLE_TASK:
            return 0
        if kind is ScheduleKind.STATIONARY_MIXTURE:
            return mixture_draw(self.seed, step, self.num_tasks)
        k = min(step // self.steps_per_phase, self.num_tasks - 1)
        return self.phase_tasks[k]

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, "num_tasks": self.num_tasks,
             "steps_per_phase": self.steps_per_phase, "seed": self.seed}
        if self.transition is not None:
            d["transition"] = self.transition.tolist()
        return d


_MASK64 = 0xFFFFFFFFFFFFFFFF


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def mixture_draw(seed: int, step: int, num_tasks: int) -> int:
    """I.i.d. uniform task index for a (seed, step) pair, without shared state."""
    return _splitmix64((seed & _MASK64) ^ _splitmix64(step)) % num_tasks


def default_transition(num_tasks: int) -> np.ndarray:
    if num_tasks == 1:
        return np.ones((1, 1))
    m = np.full((num_tasks, num_tasks), 1.0 / (num_tasks - 1))
    np.fill_diagonal(m, 0.0)
    return m


def make_schedule(kind, num_tasks: int, steps_per_phase: int, family, seed: int,
                  transition=None, **family_params) -> ContextSchedule:
    """Build a schedule whose anchors are drawn by ``family``'s task sampler.

    ``family`` is a family name or :class:`~cltree.envsim.families.Family`.
    Same arguments always give an identical schedule.
    """
    from .families import get_family

    kind = ScheduleKind(kind)
    fam = get_family(family) if isinstance(family, str) else family
    if num_tasks < 1:
        raise ScheduleError("num_tasks must be >= 1")
    if steps_per_phase <= 0:
        raise ScheduleError("steps_per_phase must be > 0")
    if kind is ScheduleKind.CONTINUOUS_DRIFT and not fam.continuous_tasks:
        raise ScheduleError(f"family {fam.name!r} has no continuous task parameters; "
                            "continuous drift is not available")
    if kind is ScheduleKind.SINGLE_TASK and num_tasks != 1:
        raise ScheduleError("single_task schedules have exactly one task")
    anchors = []
    for k in range(num_tasks):
        values = fam.sample_task(make_rng(seed, "task", k), k, **family_params)
        index = None if kind is ScheduleKind.CONTINUOUS_DRIFT else k
        anchors.append(ContextVector(values, index))
    trans = None
    phase_tasks = list(range(num_tasks))
    if kind is ScheduleKind.DISCRETE_CHAIN:
        trans = default_transition(num_tasks) if transition is None else np.asarray(transition, float)
        if trans.shape != (num_tasks, num_tasks) or np.any(trans < 0):
            raise ScheduleError("transition must be a non-negative task x task matrix")
        if not np.allclose(trans.sum(axis=1), 1.0, atol=1e-12):
            raise ScheduleError("transition rows must sum to 1")
        rng = make_rng(seed, "chain")
        phase_tasks = [0]
        for _ in range(num_tasks - 1):
            phase_tasks.append(int(rng.choice(num_tasks, p=trans[phase_tasks[-1]])))
    elif transition is not None:
        raise ScheduleError("a transition matrix is only meaningful for discrete_chain")
    return ContextSchedule(kind, num_tasks, steps_per_phase, anchors, trans, int(seed), phase_tasks)


def context_at(schedule: ContextSchedule, step: int) -> ContextVector:
    if step < 0:
        raise ScheduleError("step must be >= 0")
    kind = schedule.kind
    if kind is ScheduleKind.CONTINUOUS_DRIFT:
        P = schedule.steps_per_phase
        k = step // P
        if k >= schedule.num_tasks - 1:
            return schedule.anchors[-1]
        alpha = (step % P) / P
        if alpha == 0.0:
            return schedule.anchors[k]
        a, b = schedule.anchors[k].values, schedule.anchors[k + 1].values
        return ContextVector((1.0 - alpha) * a + alpha * b, None)
    return schedule.anchors[schedule.task_at(step)]
