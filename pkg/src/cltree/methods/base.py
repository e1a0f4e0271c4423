"""Method lifecycle and the built-in methods.

A method is configured for one concrete setting, then driven by the
evaluation protocol through ``fit`` (once per training phase),
``on_task_switch`` (only when the setting signals boundaries) and
``get_actions`` (training and test). Methods only ever see wrapped
environments, so they cannot read fields their setting withholds.
"""

from __future__ import annotations

import logging
import zlib
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .._seeding import make_rng
from ..envsim.spaces import Discrete
from ..learners import dense
from ..learners.dense import DenseNet
from ..learners.qtable import BinKey, ExactKey, QTable, epsilon_greedy, q_update
from ..taxonomy import AssumptionVector, Branch, ContextObs, MethodDescriptor
from .replay import ReplayBuffer

log = logging.getLogger(__name__)


@dataclass
class SettingDescription:
    """Everything a method may know about a setting before it starts."""

    name: str
    assumptions: AssumptionVector
    observation_space: object
    action_space: Discrete
    num_tasks: int
    classes_per_task: int = 2
    disjoint_actions: bool = False
    family: str = ""
    phase_steps: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def branch(self) -> Branch:
        return self.assumptions.branch

    @property
    def task_observed(self) -> bool:
        return self.assumptions.context_observed is ContextObs.OBSERVED

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "assumptions": self.assumptions.to_dict(),
            "observation_space": self.observation_space.to_dict(),
            "action_space": self.action_space.to_dict(),
            "num_tasks": self.num_tasks,
            "classes_per_task": self.classes_per_task,
            "disjoint_actions": self.disjoint_actions,
            "family": self.family,
            "phase_steps": self.phase_steps,
        }


class Method:
    """Base lifecycle. Subclasses set ``n_updates`` for every parameter update."""

    def __init__(self, descriptor: MethodDescriptor, setting: SettingDescription, seed: int = 0):
        self.descriptor = descriptor
        self.setting = setting
        self.seed = seed
        self.hp = dict(descriptor.hyperparameters)
        self.n_updates = 0

    def fit(self, train_env, valid_env=None) -> "Method":
        raise NotImplementedError

    def get_actions(self, observations, action_space=None):
        raise NotImplementedError

    def on_task_switch(self, task_id: int | None) -> "Method":
        return self

    def close(self) -> None:
        pass


def _obs_seed(seed: int, x) -> int:
    return zlib.crc32(np.ascontiguousarray(x, dtype=np.float64).tobytes(), seed & 0xFFFFFFFF)


class RandomMethod(Method):
    """Never learns; actions are uniform but a deterministic function of the observation."""

    def fit(self, train_env, valid_env=None):
        obs = train_env.reset()
        while True:
            obs, _ = train_env.step(self.get_actions(obs))
            if train_env.exhausted:
                return self
            if obs.episode_done:
                obs = train_env.reset()

    def get_actions(self, observations, action_space=None):
        rng = np.random.default_rng(_obs_seed(self.seed, observations.x))
        s = self.setting
        if s.branch is Branch.PASSIVE:
            n = np.asarray(observations.x).shape[0]
            if s.disjoint_actions and observations.task_id is not None:
                c = s.classes_per_task
                return observations.task_id * c + rng.integers(c, size=n)
            return rng.integers(s.action_space.n, size=n)
        return int(rng.integers(s.action_space.n))


SL_DEFAULTS = {
    "lr": 0.05,
    "hidden": 64,
    "activation": "tanh",
    "epochs": 1,
    "multi_head": None,  # None: multi-head iff task ids are observed
    "task_inference": False,
    "ewc_lambda": 0.0,
    "ewc_samples": 512,
    "replay_capacity": 0,
}

RL_DEFAULTS = {
    "lr": 0.1,
    "gamma": None,  # None: family default from FAMILY_GAMMA
    "epsilon_start": 1.0,
    "epsilon_end": 0.05,
    "epsilon_decay_fraction": 0.5,
    "bins": 6,
    "multi_head": None,
    "ewc_lambda": 0.0,
    "replay_capacity": 0,
    "replay_per_step": 1,
}


# Short-horizon gridworld tasks need a lower discount: wall bumps are
# self-loops whose value only decays at rate lr * (1 - gamma).
FAMILY_GAMMA = {"gridworld": 0.9, "cartpole": 0.99}


def defaults_for(branch: Branch) -> dict:
    return dict(SL_DEFAULTS if branch is Branch.PASSIVE else RL_DEFAULTS)


class BaseMethod(Method):
    """Fine-tuning learner with optional multi-head output, EWC and replay.

    Passive settings get a one-hidden-layer :class:`DenseNet` trained by SGD;
    active settings get tabular Q-learning. With ``ewc_lambda = 0`` and
    ``replay_capacity = 0`` it is plain fine-tuning, and those code paths
    consume no randomness, so trajectories match fine-tuning exactly.
    """

    def __init__(self, descriptor, setting, seed=0):
        super().__init__(descriptor, setting, seed)
        hp = defaults_for(setting.branch)
        unknown = set(self.hp) - set(hp)
        if unknown:
            raise ValueError(f"unknown hyperparameters for {descriptor.name}: {sorted(unknown)}")
        hp.update(self.hp)
        if setting.branch is Branch.ACTIVE and hp["gamma"] is None:
            hp["gamma"] = FAMILY_GAMMA.get(setting.family, 0.99)
        self.hp = hp
        self.rng = make_rng(seed, "method")
        mh = hp["multi_head"]
        inference = bool(hp.get("task_inference", False))
        self.multi_head = (setting.task_observed or inference) if mh is None else bool(mh)
        self.task_inference = inference and not setting.task_observed
        if self.multi_head and not (setting.task_observed or self.task_inference):
            raise ValueError("multi-head mode needs observed task ids or task inference")
        self.ewc_lambda = float(hp["ewc_lambda"])
        self.ewc_state: list | None = None
        cap = int(hp["replay_capacity"])
        self.replay = ReplayBuffer(cap) if cap > 0 else None
        self.current_head = 0
        self.task_switches = 0
        self.last_validation: float | None = None
        self._t = 0
        if setting.branch is Branch.PASSIVE:
            self._init_passive()
        else:
            self._init_active()

    # -- passive branch ----------------------------------------------------

    def _init_passive(self):
        s = self.setting
        d = s.observation_space.shape[0]
        h = int(self.hp["hidden"])
        act = self.hp["activation"]
        width = s.classes_per_task if self.multi_head else s.action_space.n
        base = DenseNet.init([d, h, width], self.rng, act)
        self.trunk = (base.weights[0], base.biases[0])
        self.heads: dict[int, DenseNet] = {0: base}
        self.head_block: dict[int, int] = {}
        self.trained_heads: set[int] = set()
        if self.multi_head and s.task_observed:
            for k in range(1, s.num_tasks):
                self._new_head(k)
        self.retained: deque = deque(maxlen=int(self.hp["ewc_samples"]))

    def _new_head(self, k: int) -> DenseNet:
        s = self.setting
        h = self.trunk[0].shape[0]
        layer = DenseNet.init([h, s.classes_per_task], self.rng, self.hp["activation"])
        net = DenseNet([self.trunk[0], layer.weights[0]], [self.trunk[1], layer.biases[0]],
                       self.hp["activation"])
        self.heads[k] = net
        return net

    def _head(self, k: int) -> DenseNet:
        return self.heads[k] if k in self.heads else self._new_head(k)

    def _train_head(self, task_id):
        if not self.multi_head:
            return 0
        return task_id if self.setting.task_observed else self.current_head

    def _allowed(self, task_id):
        """Output units the head may use (single head + observed task + disjoint labels)."""
        s = self.setting
        if not self.multi_head and s.disjoint_actions and task_id is not None:
            c = s.classes_per_task
            return np.arange(task_id * c, (task_id + 1) * c)
        return None

    def _to_local(self, head: int, labels: np.ndarray) -> np.ndarray:
        if not self.multi_head:
            return labels
        if self.setting.disjoint_actions:
            return labels % self.setting.classes_per_task
        return labels

    def _to_global(self, head: int, local: np.ndarray) -> np.ndarray:
        if self.multi_head and self.setting.disjoint_actions:
            return self.head_block.get(head, head) * self.setting.classes_per_task + local
        return local

    def _sl_update(self, x, labels, task_id):
        head = self._train_head(task_id)
        if self.multi_head and self.setting.disjoint_actions and head not in self.head_block:
            self.head_block[head] = int(labels[0]) // self.setting.classes_per_task
        groups = [(head, x, labels, task_id)]
        n_cur = len(labels)
        if self.replay is not None and len(self.replay):
            items = self.replay.sample(min(n_cur, len(self.replay)), self.rng)
            by_key: dict = {}
            for xi, yi, hi, ti in items:
                by_key.setdefault((hi, ti), []).append((xi, yi))
            for (hi, ti), rows in sorted(by_key.items(), key=lambda kv: (kv[0][0], -1 if kv[0][1] is None else kv[0][1])):
                groups.append((hi, np.stack([r[0] for r in rows]),
                               np.array([r[1] for r in rows]), ti))
        total = sum(len(g[2]) for g in groups)
        acc: dict[int, list] = {}
        loss = 0.0
        for hi, gx, gy, ti in groups:
            net = self._head(hi)
            l, grads = dense.backward_ce(net, gx, self._to_local(hi, gy), self._allowed(ti),
                                         weight=len(gy) / total)
            loss += l
            for p, g in zip(net.parameters(), grads.parameters()):
                entry = acc.get(id(p))
                if entry is None:
                    acc[id(p)] = [p, g]
                else:
                    entry[1] = entry[1] + g
            self.trained_heads.add(hi)
        if self.ewc_state and self.ewc_lambda > 0:
            for p, anchor, fisher in self.ewc_state:
                entry = acc.get(id(p))
                pen = self.ewc_lambda * fisher * (p - anchor)
                if entry is None:
                    acc[id(p)] = [p, pen]
                else:
                    entry[1] = entry[1] + pen
        lr = float(self.hp["lr"])
        for p, g in acc.values():
            if not np.all(np.isfinite(g)):
                raise FloatingPointError("non-finite gradient")
            p -= lr * g
        self.n_updates += 1
        if self.replay is not None:
            for xi, yi in zip(x, labels):
                self.replay.insert((xi, int(yi), head, task_id), self.rng)
        if self.ewc_lambda > 0:
            for xi in x:
                self.retained.append((xi, head, task_id))
        return loss

    def _sl_fit(self, env):
        for _ in range(int(self.hp["epochs"])):
            obs = env.reset()
            while True:
                actions = self.train_action(obs)
                nxt, fb = env.step(actions)
                self.learn(obs, actions, fb, nxt)
                obs = nxt
                if env.exhausted or obs.episode_done:
                    break

    def _logits(self, head: int, x, task_id=None):
        if np.asarray(x).shape[0] == 0:
            return np.zeros((0, self._head(head).sizes[-1]))
        logits = dense.forward(self._head(head), x)
        allowed = self._allowed(task_id)
        if allowed is not None:
            masked = np.full_like(logits, -np.inf)
            masked[:, allowed] = logits[:, allowed]
            logits = masked
        return logits

    def infer_task(self, x) -> np.ndarray | int:
        """Trained head with the lowest predictive entropy, per sample (ties: lowest index)."""
        if not self.trained_heads:
            raise RuntimeError("task inference needs at least one trained head")
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        xb = x[None, :] if single else x
        heads = sorted(self.trained_heads)
        ent = np.empty((len(heads), xb.shape[0]))
        for i, h in enumerate(heads):
            logp = dense.log_softmax(dense.forward(self._head(h), xb))
            ent[i] = -(np.exp(logp) * logp).sum(axis=1)
        best = np.asarray(heads)[np.argmin(ent, axis=0)]
        return int(best[0]) if single else best

    def _sl_actions(self, obs):
        x = np.asarray(obs.x, dtype=np.float64)
        if x.shape[0] == 0:
            return np.zeros(0, dtype=np.int64)
        task_id = obs.task_id
        if not self.multi_head:
            return self._logits(0, x, task_id).argmax(axis=1)
        if task_id is not None:
            return self._to_global(task_id, self._logits(task_id, x).argmax(axis=1))
        if not self.task_inference:
            raise ValueError("multi-head prediction needs a task_id when task inference is off")
        heads = self.infer_task(x)
        out = np.empty(x.shape[0], dtype=np.int64)
        for h in np.unique(heads):
            sel = heads == h
            out[sel] = self._to_global(int(h), self._logits(int(h), x[sel]).argmax(axis=1))
        return out

    def _sl_consolidate(self):
        if not self.retained:
            return
        by_head: dict = {}
        for xi, hi, ti in self.retained:
            by_head.setdefault((hi, ti), []).append(xi)
        n = len(self.retained)
        fisher: dict[int, list] = {}
        for (hi, ti), xs in sorted(by_head.items(), key=lambda kv: (kv[0][0], -1 if kv[0][1] is None else kv[0][1])):
            net = self._head(hi)
            f = dense.fisher_diagonal(net, np.stack(xs), self._allowed(ti))
            w = len(xs) / n
            for p, fp in zip(net.parameters(), f.parameters()):
                entry = fisher.get(id(p))
                if entry is None:
                    fisher[id(p)] = [p, w * fp]
                else:
                    entry[1] = entry[1] + w * fp
        self.ewc_state = (self.ewc_state or []) + [(p, p.copy(), f) for p, f in fisher.values()]
        self.retained.clear()

    def ewc_penalty(self) -> float:
        """Sum over consolidations of ``F * (theta - theta*)^2`` (unscaled by lambda)."""
        if not self.ewc_state:
            return 0.0
        if self.setting.branch is Branch.PASSIVE:
            return float(sum((f * (p - a) ** 2).sum() for p, a, f in self.ewc_state))
        total = 0.0
        for table, anchor, f in self.ewc_state:
            n = anchor.shape[0]
            total += float((f * (table.values[:n] - anchor) ** 2).sum())
        return total

    # -- active branch -----------------------------------------------------

    def _init_active(self):
        s = self.setting
        if s.family == "cartpole":
            from ..envsim.cartpole import default_bin_edges

            key = BinKey(default_bin_edges(int(self.hp["bins"])))
        else:
            key = ExactKey()
        n = s.action_space.n
        count = s.num_tasks if (self.multi_head and s.task_observed) else 1
        self.tables = [QTable(n, key) for _ in range(count)]

    def _table(self, task_id) -> int:
        if self.multi_head and task_id is not None:
            return int(task_id)
        return 0

    def _epsilon(self, t: int) -> float:
        hp = self.hp
        horizon = max(1.0, hp["epsilon_decay_fraction"] * max(self.setting.phase_steps, 1))
        frac = min(1.0, t / horizon)
        return hp["epsilon_start"] + frac * (hp["epsilon_end"] - hp["epsilon_start"])

    def _ewc_pull(self, ti: int, s: int, a: int):
        for table, anchor, f in self.ewc_state:
            if table is self.tables[ti] and s < anchor.shape[0] and f[s, a] > 0:
                v = table.values
                v[s, a] -= self.hp["lr"] * self.ewc_lambda * f[s, a] * (v[s, a] - anchor[s, a])

    def _backup(self, ti, s, a, r, s2, done):
        q_update(self.tables[ti], s, a, r, s2, done, self.hp["lr"], self.hp["gamma"])
        if self.ewc_state and self.ewc_lambda > 0:
            self._ewc_pull(ti, s, a)

    def _rl_fit(self, env):
        obs = env.reset()
        while True:
            a = self.train_action(obs)
            nxt, fb = env.step(a)
            self.learn(obs, a, fb, nxt)
            if env.exhausted:
                break
            obs = env.reset() if nxt.episode_done else nxt

    def _rl_actions(self, obs):
        table = self.tables[self._table(obs.task_id)]
        row = table.rows.get(table.key(obs.x))
        if row is None:
            return 0
        return table.greedy(row)

    def _rl_consolidate(self):
        state = []
        for table in self.tables:
            n = len(table)
            if n == 0:
                continue
            counts = table.counts[:n].astype(np.float64)
            peak = counts.max()
            f = counts / peak if peak > 0 else counts
            state.append((table, table.values[:n].copy(), f))
        self.ewc_state = (self.ewc_state or []) + state

    # -- lifecycle ---------------------------------------------------------

    # -- single-step interface (the fit loops and external drivers use it) --

    def begin_phase(self):
        """Restart the per-phase exploration clock."""
        self._t = 0
        return self

    def train_action(self, obs):
        """Action to take on a training step, exploration included."""
        if self.setting.branch is Branch.PASSIVE:
            if self.multi_head and obs.task_id is None:
                # the head being trained is known even when the task id is not
                h = self.current_head
                return self._to_global(h, self._logits(h, obs.x).argmax(axis=1))
            return self.get_actions(obs)
        table = self.tables[self._table(obs.task_id)]
        s = table.index(obs.x)
        return epsilon_greedy(table.values[s], self._epsilon(self._t), self.rng)

    def learn(self, obs, action, feedback, nxt):
        """One update from the transition ``obs --action--> nxt``."""
        if self.setting.branch is Branch.PASSIVE:
            return self._sl_update(np.asarray(obs.x), np.asarray(feedback.label), obs.task_id)
        ti = self._table(obs.task_id)
        table = self.tables[ti]
        s, s2 = table.index(obs.x), table.index(nxt.x)
        r = float(feedback.reward)
        # time and budget limits truncate; only true terminals stop bootstrapping
        done = nxt.episode_done and not nxt.truncated
        self._backup(ti, s, int(action), r, s2, done)
        self.n_updates += 1
        if self.replay is not None:
            self.replay.insert((ti, s, int(action), r, s2, done), self.rng)
            k = min(int(self.hp["replay_per_step"]), len(self.replay))
            for item in self.replay.sample(k, self.rng):
                self._backup(*item)
        self._t += 1

    def fit(self, train_env, valid_env=None):
        self.begin_phase()
        if self.setting.branch is Branch.PASSIVE:
            self._sl_fit(train_env)
        else:
            self._rl_fit(train_env)
        if valid_env is not None:
            self.last_validation = self._validate(valid_env)
            log.debug("%s validation performance %.4f", self.descriptor.name, self.last_validation)
        return self

    def _validate(self, env) -> float:
        total, count = 0.0, 0
        obs = env.reset()
        ep = 0.0
        while True:
            nxt, fb = env.step(self.get_actions(obs))
            if self.setting.branch is Branch.PASSIVE:
                total += float(np.sum(fb.reward))
                count += len(np.atleast_1d(fb.reward))
            else:
                ep += float(fb.reward)
                if nxt.episode_done:
                    total += ep
                    count += 1
                    ep = 0.0
            if env.exhausted:
                break
            obs = env.reset() if nxt.episode_done else nxt
        return total / max(count, 1)

    def get_actions(self, observations, action_space=None):
        if self.setting.branch is Branch.PASSIVE:
            return self._sl_actions(observations)
        return self._rl_actions(observations)

    def on_task_switch(self, task_id):
        self.task_switches += 1
        if self.ewc_lambda > 0:
            if self.setting.branch is Branch.PASSIVE:
                self._sl_consolidate()
            else:
                self._rl_consolidate()
        if self.multi_head:
            if task_id is not None:
                self.current_head = int(task_id)
            elif self.task_inference:
                self.current_head += 1
        return self
