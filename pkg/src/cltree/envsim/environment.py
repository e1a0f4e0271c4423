"""Step-based environments over a hidden-mode MDP, and the setting wrapper.

Raw environments always know the task index and whether a boundary was just
crossed. :func:`wrap_for_setting` strips whatever the setting's assumption
vector does not grant before anything reaches a method.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .._seeding import make_rng
from ..taxonomy import AssumptionVector, Boundary, Branch, ContextObs, Continuity, Stationarity
from . import cartpole, gridworld, passive
from .families import get_family
from .schedule import ContextSchedule, ContextVector, ScheduleKind, context_at, make_schedule
from .spaces import Box, Discrete, MultiBinary


class ConfigurationError(ValueError):
    pass


@dataclass
class Observation:
    x: np.ndarray
    task_id: int | None = None
    boundary: bool | None = None
    episode_done: bool = False
    truncated: bool = False  # episode ended by a time or budget limit, not a terminal state

    def to_dict(self) -> dict:
        return {"x": np.asarray(self.x).tolist(), "task_id": self.task_id,
                "boundary": self.boundary, "episode_done": self.episode_done,
                "truncated": self.truncated}


@dataclass
class Feedback:
    reward: float | np.ndarray
    label: np.ndarray | None = None

    def to_dict(self) -> dict:
        r = self.reward.tolist() if isinstance(self.reward, np.ndarray) else self.reward
        lab = None if self.label is None else np.asarray(self.label).tolist()
        return {"reward": r, "label": lab}


@dataclass
class EnvironmentSpec:
    family: str
    schedule: ContextSchedule
    observation_dim: int
    n_actions: int
    disjoint_actions: bool = False
    classes_per_task: int = passive.DEFAULT_CLASSES
    sigma: float = passive.DEFAULT_SIGMA
    batch_size: int = 32
    max_episode_len: int | None = None
    dataset_path: str | None = None
    layout_dir: str | None = None
    datasets: list | None = field(default=None, repr=False, compare=False)
    layouts: list | None = field(default=None, repr=False, compare=False)

    @property
    def branch(self) -> Branch:
        return get_family(self.family).branch

    @property
    def metric_kind(self) -> str:
        return "accuracy" if self.branch is Branch.PASSIVE else "mean_episode_return"

    @property
    def num_tasks(self) -> int:
        return self.schedule.num_tasks

    @property
    def observation_space(self):
        if self.family == "gridworld":
            return MultiBinary(self.observation_dim)
        if self.family == "cartpole":
            return Box((4,), -np.inf, np.inf)
        return Box((self.observation_dim,), -np.inf, np.inf)

    @property
    def action_space(self) -> Discrete:
        return Discrete(self.n_actions)

    def task_actions(self, task: int | None) -> range:
        """Actions valid for ``task``: its class block when actions are disjoint."""
        if self.disjoint_actions and task is not None:
            c = self.classes_per_task
            return range(task * c, (task + 1) * c)
        return range(self.n_actions)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "schedule": self.schedule.to_dict(),
            "observation_dim": self.observation_dim,
            "disjoint_actions": self.disjoint_actions,
            "classes_per_task": self.classes_per_task,
            "sigma": self.sigma,
            "batch_size": self.batch_size,
            "max_episode_len": self.max_episode_len,
            "dataset_path": self.dataset_path,
            "layout_dir": self.layout_dir,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EnvironmentSpec":
        s = d["schedule"]
        return build_spec(d["family"], s["num_tasks"], s["steps_per_phase"], s["kind"], s["seed"],
                          disjoint_actions=d.get("disjoint_actions", False),
                          classes_per_task=d.get("classes_per_task", passive.DEFAULT_CLASSES),
                          sigma=d.get("sigma", passive.DEFAULT_SIGMA),
                          observation_dim=d.get("observation_dim"),
                          batch_size=d.get("batch_size", 32),
                          max_episode_len=d.get("max_episode_len"),
                          dataset_path=d.get("dataset_path"), layout_dir=d.get("layout_dir"),
                          transition=s.get("transition"))


def build_spec(family: str, num_tasks: int, steps_per_phase: int, schedule_kind, seed: int, *,
               disjoint_actions: bool = False, classes_per_task: int = passive.DEFAULT_CLASSES,
               sigma: float = passive.DEFAULT_SIGMA, observation_dim: int | None = None,
               batch_size: int = 32, max_episode_len: int | None = None,
               dataset_path: str | None = None, layout_dir: str | None = None,
               transition=None) -> EnvironmentSpec:
    fam = get_family(family)
    kind = ScheduleKind(schedule_kind)
    if disjoint_actions and fam.branch is not Branch.PASSIVE:
        raise ConfigurationError("disjoint action spaces are only supported for passive families")
    if disjoint_actions and kind is ScheduleKind.CONTINUOUS_DRIFT:
        raise ConfigurationError("disjoint action spaces need discrete tasks, not continuous drift")
    params: dict = {}
    datasets = layouts = None
    if family == "synthetic_gaussian":
        observation_dim = observation_dim or passive.DEFAULT_DIM
        params = {"classes_per_task": classes_per_task, "observation_dim": observation_dim}
    elif family == "split_csv":
        if dataset_path is None:
            raise ConfigurationError("split_csv needs a dataset_path")
        data = passive.load_csv_dataset(dataset_path)
        k = int(data.y.max()) + 1
        try:
            splits = passive.split_by_class(data, num_tasks, seed)
        except passive.DatasetError as err:
            raise ConfigurationError(str(err)) from None
        classes_per_task = k // num_tasks
        datasets = [passive.train_test_split(t) for t in splits]
        observation_dim = data.X.shape[1]
    elif family == "cartpole":
        observation_dim = 4
        max_episode_len = max_episode_len or cartpole.MAX_EPISODE_LEN
    elif family == "gridworld":
        layouts = (gridworld.load_layouts(layout_dir) if layout_dir
                   else gridworld.default_layouts())
        h, w = layouts[0].shape
        observation_dim = 2 * h * w
        max_episode_len = max_episode_len or gridworld.MAX_EPISODE_LEN
        params = {"n_layouts": len(layouts)}
    schedule = make_schedule(kind, num_tasks, steps_per_phase, fam, seed, transition, **params)
    if fam.branch is Branch.PASSIVE:
        n_actions = classes_per_task * num_tasks if disjoint_actions else classes_per_task
    else:
        n_actions = 2 if family == "cartpole" else 4
    return EnvironmentSpec(family, schedule, int(observation_dim), n_actions, disjoint_actions,
                           classes_per_task, sigma, batch_size, max_episode_len,
                           None if dataset_path is None else str(dataset_path),
                           None if layout_dir is None else str(layout_dir), datasets, layouts)


# -- context sources -------------------------------------------------------


class ScheduleSource:
    """Contexts for a run of ``length`` steps starting at global ``start``."""

    def __init__(self, schedule: ContextSchedule, start: int, length: int):
        self.schedule, self.start, self.length = schedule, start, length

    def context(self, t: int) -> ContextVector:
        return context_at(self.schedule, self.start + t)

    def boundary(self, t: int) -> bool:
        g = self.start + t
        s = self.schedule
        if g == 0 or s.kind.stationary or s.kind is ScheduleKind.CONTINUOUS_DRIFT:
            return False
        return s.task_at(g) != s.task_at(g - 1)

    @property
    def drifting(self) -> bool:
        return self.schedule.kind is ScheduleKind.CONTINUOUS_DRIFT


class FixedSource:
    drifting = False

    def __init__(self, context: ContextVector):
        self._context = context

    def context(self, t: int) -> ContextVector:
        return self._context

    def boundary(self, t: int) -> bool:
        return False


class Monitor:
    """Records training-stream performance; windows it into the online curve."""

    def __init__(self, window: int = 100):
        self.window = window
        self.step = 0
        self.points: list[tuple[int, float]] = []

    def tick(self, value: float | None = None):
        self.step += 1
        if value is not None:
            self.points.append((self.step, float(value)))

    def episode(self, value: float):
        self.points.append((self.step, float(value)))

    def curve(self) -> list[tuple[int, float]]:
        buckets: dict[int, list[float]] = {}
        for step, v in self.points:
            buckets.setdefault((max(step, 1) - 1) // self.window, []).append(v)
        return [((k + 1) * self.window, float(np.mean(vs))) for k, vs in sorted(buckets.items())]


# -- raw environments ------------------------------------------------------


class _RawEnv:
    spec: EnvironmentSpec
    exhausted: bool = False

    @property
    def branch(self) -> Branch:
        return self.spec.branch

    @property
    def observation_space(self):
        return self.spec.observation_space

    @property
    def action_space(self):
        return self.spec.action_space


class PassiveEnv(_RawEnv):
    """Labeled stream: each step emits a batch; the action never affects what comes next.

    ``reset()`` rewinds to the start of the stream, so repeated passes
    (epochs) see identical data.
    """

    def __init__(self, spec: EnvironmentSpec, source, seed_key: tuple, max_steps: int,
                 batch_size: int | None = None, split: str = "train",
                 monitor: Monitor | None = None):
        self.spec, self.source, self.seed_key = spec, source, seed_key
        self.max_steps = max_steps
        self.batch_size = batch_size or spec.batch_size
        self.split = split
        self.monitor = monitor
        self._batch = None
        self.t = 0

    def _draw(self, t):
        ctx = self.source.context(t)
        pools = None
        if self.spec.datasets is not None:
            idx = 1 if self.split == "test" else 0
            pools = [pair[idx] for pair in self.spec.datasets]
        x, y = passive.sample_passive(ctx, self._rng, self.batch_size,
                                      classes=self.spec.classes_per_task, sigma=self.spec.sigma,
                                      disjoint_actions=self.spec.disjoint_actions, dataset=pools)
        return ctx, x, y

    def _obs(self):
        ctx, x, _ = self._batch
        return Observation(x, ctx.task_index, self.source.boundary(self.t), False)

    def reset(self) -> Observation:
        self._rng = make_rng(*self.seed_key)
        self.t = 0
        self.exhausted = False
        self._batch = self._draw(0)
        return self._obs()

    def step(self, action):
        if self._batch is None:
            raise RuntimeError("step() called on an exhausted or un-reset environment")
        ctx, x, y = self._batch
        action = np.asarray(action).reshape(-1)
        if action.shape[0] != len(y):
            raise ValueError(f"expected {len(y)} actions, got {action.shape[0]}")
        reward = (action == y).astype(np.float64)
        if self.monitor is not None:
            self.monitor.tick(reward.mean())
        self.t += 1
        if self.t >= self.max_steps:
            self._batch = None
            self.exhausted = True
            obs = Observation(np.empty((0, x.shape[1])), ctx.task_index, False, True, True)
        else:
            self._batch = self._draw(self.t)
            obs = self._obs()
        return obs, Feedback(reward, y)


class _ActiveEnv(_RawEnv):
    """Episodic active environment with a step budget (train) or episode budget (test)."""

    def __init__(self, spec: EnvironmentSpec, source, seed_key: tuple,
                 max_steps: int | None = None, max_episodes: int | None = None,
                 monitor: Monitor | None = None):
        if (max_steps is None) == (max_episodes is None):
            raise ValueError("give exactly one of max_steps / max_episodes")
        self.spec, self.source, self.seed_key = spec, source, seed_key
        self.max_steps, self.max_episodes = max_steps, max_episodes
        self.monitor = monitor
        self._rng = None
        self.t = 0
        self.episodes = 0
        self.in_episode = False

    def reset(self) -> Observation:
        if self._rng is None:
            self._rng = make_rng(*self.seed_key)
        if self.exhausted:
            raise RuntimeError("environment budget exhausted")
        self.ctx = self.source.context(self.t)
        self.ep_t = 0
        self.ep_return = 0.0
        self.in_episode = True
        boundary = self.source.boundary(self.t) if self.t == 0 else False
        self._begin_episode()
        return Observation(self._encode(), self.ctx.task_index, boundary, False)

    def step(self, action):
        if not self.in_episode:
            raise RuntimeError("step() called outside an episode; call reset()")
        action = int(np.asarray(action).reshape(-1)[0])
        if self.source.drifting:
            self.ctx = self.source.context(self.t)
        reward, done = self._advance(action)
        terminal = self._terminal()
        self.ep_t += 1
        self.t += 1
        self.ep_return += reward
        if self.monitor is not None:
            self.monitor.tick()
        if self.max_steps is not None and self.t >= self.max_steps:
            done = True
            self.exhausted = True
        if done:
            self.in_episode = False
            self.episodes += 1
            if self.monitor is not None:
                self.monitor.episode(self.ep_return)
            if self.max_episodes is not None and self.episodes >= self.max_episodes:
                self.exhausted = True
        obs = Observation(self._encode(), self.ctx.task_index, False, done, done and not terminal)
        return obs, Feedback(reward)


class CartPoleEnv(_ActiveEnv):
    def _begin_episode(self):
        self.state = cartpole.initial_state(self._rng)

    def _advance(self, action):
        self.state, r, done = cartpole.step_cartpole(self.state, action, self.ctx, self.ep_t,
                                                     self.spec.max_episode_len)
        return r, done

    def _terminal(self):
        return cartpole.failed(self.state)

    def _encode(self):
        return self.state.copy()


class GridworldEnv(_ActiveEnv):
    def _begin_episode(self):
        self.layout = gridworld.select_layout(self.ctx, self.spec.layouts)
        self.state = gridworld.reset_state(self.layout)

    def _advance(self, action):
        self.state, r, done = gridworld.step_gridworld(self.state, action, self.layout,
                                                       self.spec.max_episode_len)
        return r, done

    def _terminal(self):
        return self.state.pos == self.layout.goal

    def _encode(self):
        return gridworld.encode(self.state, self.layout)


def make_raw_env(spec: EnvironmentSpec, source, seed_key: tuple, *, max_steps=None,
                 max_episodes=None, batch_size=None, split="train", monitor=None):
    if spec.branch is Branch.PASSIVE:
        return PassiveEnv(spec, source, seed_key, max_steps, batch_size, split, monitor)
    cls = CartPoleEnv if spec.family == "cartpole" else GridworldEnv
    return cls(spec, source, seed_key, max_steps=max_steps, max_episodes=max_episodes,
               monitor=monitor)


# -- setting wrapper -------------------------------------------------------


def check_schedule(assumptions: AssumptionVector, kind: ScheduleKind) -> None:
    """Reject schedules that break a promise the setting makes to its methods."""
    kind = ScheduleKind(kind)
    if assumptions.stationarity is Stationarity.STATIONARY:
        if not kind.stationary:
            raise ConfigurationError(f"stationary setting cannot use a {kind.value} schedule")
    else:
        if kind.stationary:
            raise ConfigurationError(f"non-stationary setting cannot use a {kind.value} schedule")
        if (assumptions.context_continuity is Continuity.DISCRETE
                and kind is ScheduleKind.CONTINUOUS_DRIFT):
            raise ConfigurationError("discrete-context setting cannot use a continuous_drift schedule")


class Environment:
    """What a method sees: the raw environment with unearned fields removed."""

    def __init__(self, raw, assumptions: AssumptionVector):
        self.raw = raw
        self.assumptions = assumptions
        self._show_task = assumptions.context_observed is ContextObs.OBSERVED
        self._show_boundary = assumptions.boundary_signal is Boundary.SIGNALED

    @property
    def observation_space(self):
        return self.raw.observation_space

    @property
    def action_space(self):
        return self.raw.action_space

    @property
    def exhausted(self) -> bool:
        return self.raw.exhausted

    @property
    def branch(self) -> Branch:
        return self.raw.branch

    def _mask(self, obs: Observation) -> Observation:
        return replace(obs,
                       task_id=obs.task_id if self._show_task else None,
                       boundary=bool(obs.boundary) if self._show_boundary else None)

    def reset(self) -> Observation:
        return self._mask(self.raw.reset())

    def step(self, action):
        obs, fb = self.raw.step(action)
        if self.assumptions.branch is not Branch.PASSIVE:
            fb = replace(fb, label=None)
        return self._mask(obs), fb


def wrap_for_setting(env, assumptions: AssumptionVector) -> Environment:
    if assumptions.abstract:
        raise ConfigurationError("abstract settings (branch unspecified) cannot be instantiated")
    if env.branch is not assumptions.branch:
        raise ConfigurationError(f"environment family {env.spec.family!r} is "
                                 f"{env.branch.value}, setting is {assumptions.branch.value}")
    check_schedule(assumptions, env.spec.schedule.kind)
    return Environment(env, assumptions)
