"""Train/test protocol: run a method through a setting and fill the transfer matrix.

For sequential settings every training phase is followed by a test pass
over all tasks, each on freshly drawn data (seeded by seed, row and task).
Stationary settings train once over the whole mixture and give one row.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .._seeding import make_rng
from ..envsim import environment as envm
from ..envsim.environment import (
    ConfigurationError,
    EnvironmentSpec,
    FixedSource,
    Monitor,
    ScheduleSource,
    build_spec,
    make_raw_env,
    wrap_for_setting,
)
from ..envsim.families import get_family
from ..envsim.schedule import ScheduleKind
from ..methods.base import SettingDescription
from ..methods.registry import configure
from ..taxonomy import (
    Boundary,
    Branch,
    ContextObs,
    MethodDescriptor,
    SettingNode,
    Stationarity,
    check_applicable,
    get_setting,
)
from .metrics import WINDOW
from .results import Results, TransferMatrix

log = logging.getLogger(__name__)

TEST_SAMPLES = 1000
TEST_EPISODES = 20
VALID_SAMPLES = 200
VALID_EPISODES = 2


def default_schedule(node: SettingNode, family: str, num_tasks: int) -> ScheduleKind:
    """Schedule a setting gets when the config does not name one."""
    trunk = node.trunk
    if trunk == "traditional":
        return ScheduleKind.SINGLE_TASK if num_tasks == 1 else ScheduleKind.STATIONARY_MIXTURE
    if trunk == "multi_task":
        return ScheduleKind.STATIONARY_MIXTURE
    if trunk == "continuous_task_agnostic" and get_family(family).continuous_tasks:
        return ScheduleKind.CONTINUOUS_DRIFT
    return ScheduleKind.INCREMENTAL_SEQUENCE


ENV_KEYS = ("family", "num_tasks", "steps_per_phase", "schedule", "disjoint_actions",
            "classes_per_task", "sigma", "observation_dim", "batch_size", "max_episode_len",
            "dataset_path", "layout_dir", "transition")


@dataclass
class Setting:
    """A concrete catalog node bound to an environment configuration."""

    node: SettingNode
    env: dict
    test_samples: int = TEST_SAMPLES
    test_episodes: int = TEST_EPISODES
    valid_samples: int = VALID_SAMPLES
    valid_episodes: int = VALID_EPISODES
    window: int = WINDOW
    _specs: dict = field(default_factory=dict, repr=False)

    @classmethod
    def create(cls, name: str, family: str, num_tasks: int, steps_per_phase: int,
               schedule=None, **env) -> "Setting":
        node = get_setting(name)
        if node.abstract:
            raise ConfigurationError(f"{name!r} is abstract; pick a _sl or _rl setting")
        fam = get_family(family)
        if fam.branch is not node.assumptions.branch:
            raise ConfigurationError(f"family {family!r} is {fam.branch.value}; "
                                     f"setting {name!r} is {node.assumptions.branch.value}")
        kind = ScheduleKind(schedule) if schedule else default_schedule(node, family, num_tasks)
        envm.check_schedule(node.assumptions, kind)
        unknown = set(env) - set(ENV_KEYS)
        if unknown:
            raise ConfigurationError(f"unknown environment fields {sorted(unknown)}")
        cfg = {"family": family, "num_tasks": int(num_tasks),
               "steps_per_phase": int(steps_per_phase), "schedule": kind.value, **env}
        return cls(node, cfg)

    @property
    def name(self) -> str:
        return self.node.name

    @property
    def assumptions(self):
        return self.node.assumptions

    @property
    def stationary(self) -> bool:
        return self.assumptions.stationarity is Stationarity.STATIONARY

    def spec(self, seed: int) -> EnvironmentSpec:
        if seed not in self._specs:
            e = dict(self.env)
            self._specs[seed] = build_spec(
                e.pop("family"), e.pop("num_tasks"), e.pop("steps_per_phase"), e.pop("schedule"),
                seed, **{k: v for k, v in e.items() if v is not None})
        return self._specs[seed]

    def description(self, spec: EnvironmentSpec) -> SettingDescription:
        phase_steps = spec.schedule.total_steps if self.stationary else spec.schedule.steps_per_phase
        return SettingDescription(
            self.name, self.assumptions, spec.observation_space, spec.action_space,
            spec.num_tasks, spec.classes_per_task, spec.disjoint_actions, spec.family, phase_steps)

    # -- environment factories --------------------------------------------

    def phase_bounds(self, spec: EnvironmentSpec, phase: int) -> tuple[int, int]:
        if self.stationary:
            return 0, spec.schedule.total_steps
        n = spec.schedule.steps_per_phase
        return phase * n, n

    def train_env(self, spec, seed, phase, monitor=None):
        start, length = self.phase_bounds(spec, phase)
        raw = make_raw_env(spec, ScheduleSource(spec.schedule, start, length),
                           (seed, "train", phase), max_steps=length, monitor=monitor)
        return wrap_for_setting(raw, self.assumptions)

    def valid_env(self, spec, seed, phase):
        start, _ = self.phase_bounds(spec, phase)
        ctx = envm.context_at(spec.schedule, start)
        key = (seed, "valid", phase)
        if spec.branch is Branch.PASSIVE:
            raw = make_raw_env(spec, FixedSource(ctx), key, max_steps=1,
                               batch_size=self.valid_samples, split="test")
        else:
            raw = make_raw_env(spec, FixedSource(ctx), key, max_episodes=self.valid_episodes)
        return wrap_for_setting(raw, self.assumptions)

    def test_env(self, spec, seed, row, task):
        """Held-out data for ``task``; under drift the task is its anchor context."""
        ctx = spec.schedule.anchors[task]
        key = (seed, "test", row, task)
        if spec.branch is Branch.PASSIVE:
            raw = make_raw_env(spec, FixedSource(ctx), key, max_steps=1,
                               batch_size=self.test_samples, split="test")
        else:
            raw = make_raw_env(spec, FixedSource(ctx), key, max_episodes=self.test_episodes)
        return wrap_for_setting(raw, self.assumptions)

    # -- chance reference --------------------------------------------------

    def chance(self, spec: EnvironmentSpec, seed: int) -> list[float]:
        """Per-task performance of a uniform random policy.

        Passive: 1/C when predictions are confined to one task's classes
        (shared labels, or disjoint labels with the task observed), else 1/(T*C).
        Active: mean return of uniform random actions over the test budget.
        """
        T = spec.num_tasks
        if spec.branch is Branch.PASSIVE:
            c = spec.classes_per_task
            observed = self.assumptions.context_observed is ContextObs.OBSERVED
            if spec.disjoint_actions and not observed:
                return [1.0 / (T * c)] * T
            return [1.0 / c] * T
        out = []
        for j in range(T):
            env = make_raw_env(spec, FixedSource(spec.schedule.anchors[j]), (seed, "chance", j),
                               max_episodes=self.test_episodes)
            rng = make_rng(seed, "chance-policy", j)
            out.append(_rollout(env, lambda obs: int(rng.integers(spec.n_actions))))
        return out

    def apply(self, descriptor: MethodDescriptor, seed: int, config: dict | None = None,
              method=None) -> Results:
        return apply(self, descriptor, seed, config, method)


def _rollout(env, policy) -> float:
    """Mean episode return (active) or accuracy (passive) of ``policy`` on ``env``."""
    total, count = 0.0, 0
    obs = env.reset()
    ret = 0.0
    passive = env.branch is Branch.PASSIVE
    while True:
        nxt, fb = env.step(policy(obs))
        if passive:
            r = np.atleast_1d(fb.reward)
            total += float(r.sum())
            count += r.shape[0]
        else:
            ret += float(fb.reward)
            if nxt.episode_done:
                total += ret
                count += 1
                ret = 0.0
        if env.exhausted:
            break
        obs = env.reset() if nxt.episode_done else nxt
    return total / max(count, 1)


def evaluate(method, env) -> float:
    """Test pass; raises if the method updates its parameters while being tested."""
    before = method.n_updates
    value = _rollout(env, method.get_actions)
    if method.n_updates != before:
        raise RuntimeError(f"method {method.descriptor.name!r} updated during a test pass")
    return value


def apply(setting: Setting, descriptor: MethodDescriptor, seed: int, config: dict | None = None,
          method=None) -> Results:
    """Run ``descriptor`` through ``setting`` with ``seed``; returns per-seed :class:`Results`."""
    check_applicable(descriptor, setting.assumptions)
    t0 = time.perf_counter()
    spec = setting.spec(seed)
    desc = setting.description(spec)
    method = method or configure(descriptor, desc, seed)
    monitor = Monitor(setting.window)
    signaled = setting.assumptions.boundary_signal is Boundary.SIGNALED
    observed = setting.assumptions.context_observed is ContextObs.OBSERVED
    sched = spec.schedule
    n_phases = 1 if setting.stationary else sched.num_phases
    T = spec.num_tasks
    rows = np.zeros((n_phases, T))
    switches = 0
    status, diagnostic = "ok", None
    try:
        for i in range(n_phases):
            start, _ = setting.phase_bounds(spec, i)
            if i > 0 and signaled and sched.task_at(start) != sched.task_at(start - 1):
                method.on_task_switch(sched.task_at(start) if observed else None)
                switches += 1
            method.fit(setting.train_env(spec, seed, i, monitor),
                       setting.valid_env(spec, seed, i))
            for j in range(T):
                rows[i, j] = evaluate(method, setting.test_env(spec, seed, i, j))
    except FloatingPointError as err:
        status, diagnostic = "failed", f"numerical failure: {err}"
        rows[:] = np.nan
    finally:
        method.close()
    res = Results(TransferMatrix(rows, spec.metric_kind), setting.chance(spec, seed),
                  monitor.curve(), config or {}, int(seed))
    if status == "ok" and not res.finite():
        status, diagnostic = "failed", "non-finite metric"
    res.status, res.diagnostic = status, diagnostic
    res.diagnostics = {
        "task_switch_calls": switches,
        "updates": int(method.n_updates),
        "phase_tasks": [sched.task_at(setting.phase_bounds(spec, i)[0]) for i in range(n_phases)]
        if not setting.stationary else None,
    }
    res.wall_time_seconds = time.perf_counter() - t0
    if status != "ok":
        log.warning("run failed: %s", diagnostic)
    return res
