import numpy as np
import pytest

from cltree.envsim import passive
from cltree.envsim.environment import Observation
from cltree.evaluation import Setting
from cltree.learners import BinKey, DenseNet, ExactKey, dense
from cltree.methods import make_descriptor
from cltree.methods.registry import configure
from cltree.methods.replay import ReplayBuffer
from cltree.taxonomy import ContextObs, concrete_settings


def _configure(name, setting, seed=0, **hp):
    spec = setting.spec(seed)
    return configure(make_descriptor(name, hp), setting.description(spec), seed), spec


def _sl(name="incremental_sl", n=5, steps=200, **env):
    env.setdefault("disjoint_actions", True)
    return Setting.create(name, "synthetic_gaussian", n, steps, **env)


# -- configuration -----------------------------------------------------------


def test_task_incremental_gets_five_heads_of_width_two():
    m, _ = _configure("base", _sl("task_incremental_sl"))
    assert m.multi_head and sorted(m.heads) == [0, 1, 2, 3, 4]
    assert all(h.sizes[-1] == 2 for h in m.heads.values())
    trunk = m.heads[0].weights[0]
    assert all(h.weights[0] is trunk for h in m.heads.values())


def test_traditional_rl_cartpole_single_table():
    m, _ = _configure("base", Setting.create("traditional_rl", "cartpole", 1, 100))
    assert len(m.tables) == 1 and not m.multi_head
    assert isinstance(m.tables[0].key, BinKey)


def test_incremental_sl_single_global_head():
    m, _ = _configure("base", _sl())
    assert not m.multi_head and not m.task_inference
    assert list(m.heads) == [0] and m.heads[0].sizes[-1] == 10


FAMILY = {"passive": "synthetic_gaussian", "active": "gridworld"}


@pytest.mark.parametrize("node", concrete_settings(), ids=lambda n: n.name)
def test_configuration_table(node):
    # multi-head exactly where task ids are observed
    branch = node.assumptions.branch.value
    n = 1 if node.trunk == "traditional" else 2
    s = Setting.create(node.name, FAMILY[branch], n, 10)
    m, _ = _configure("base", s)
    observed = node.assumptions.context_observed is ContextObs.OBSERVED
    assert m.multi_head == observed
    if branch == "active":
        assert isinstance(m.tables[0].key, ExactKey)
        assert len(m.tables) == (n if observed else 1)
    else:
        assert len(m.heads) == (n if observed else 1)


def test_unknown_hyperparameter_rejected():
    with pytest.raises(ValueError):
        _configure("base", _sl(), bogus=1)


def test_multi_head_without_task_info_rejected():
    with pytest.raises(ValueError):
        _configure("base", _sl(), multi_head=True)


# -- fit / get_actions -------------------------------------------------------


def _train_phases(m, setting, spec, phases, seed=0, switch=True):
    for i in range(phases):
        if i and switch:
            observed = setting.assumptions.context_observed is ContextObs.OBSERVED
            m.on_task_switch(i if observed else None)
        m.fit(setting.train_env(spec, seed, i))
    return m


def _params(m):
    if hasattr(m, "heads"):
        return [p.copy() for h in sorted(m.heads) for p in m.heads[h].parameters()]
    return [t.values[:len(t)].copy() for t in m.tables]


@pytest.mark.parametrize("variant", [("ewc", {"ewc_lambda": 0.0}),
                                     ("replay", {"replay_capacity": 0})])
@pytest.mark.parametrize("setting", ["incremental_sl", "task_incremental_sl", "incremental_rl"])
def test_fine_tuning_equivalence(variant, setting):
    if setting.endswith("rl"):
        s = Setting.create(setting, "gridworld", 2, 300)
    else:
        s = _sl(setting, n=3, steps=50)
    ref, spec = _configure("base", s)
    other, _ = _configure(variant[0], s, **variant[1])
    _train_phases(ref, s, spec, 2)
    _train_phases(other, s, spec, 2)
    assert all(np.array_equal(a, b) for a, b in zip(_params(ref), _params(other)))


def test_single_task_sl_reaches_high_accuracy():
    s = Setting.create("traditional_sl", "synthetic_gaussian", 1, 200, sigma=0.15)
    r = s.apply(make_descriptor("base", {"epochs": 5}), 0)
    assert r.matrix.rows[0, 0] >= 0.95


@pytest.mark.slow
def test_cartpole_q_learning_balances():
    s = Setting.create("traditional_rl", "cartpole", 1, 50_000)
    r = s.apply(make_descriptor("base"), 0)
    assert r.matrix.rows[0, 0] >= 120


def test_multi_head_uses_observed_task_block():
    s = _sl("task_incremental_sl", n=3, steps=60)
    m, spec = _configure("base", s)
    _train_phases(m, s, spec, 3)
    x, y = passive.sample_passive(spec.schedule.anchors[2], np.random.default_rng(1), 200,
                                  disjoint_actions=True)
    pred = m.get_actions(Observation(x, task_id=2))
    assert set(np.unique(pred)) <= {4, 5}
    assert np.mean(pred == y) > 0.9


def test_single_head_masking_with_observed_task():
    s = _sl("task_incremental_sl", n=3, steps=20)
    m, spec = _configure("base", s, multi_head=False)
    x = np.random.default_rng(0).normal(size=(50, spec.observation_space.shape[0]))
    for k in range(3):
        assert set(m.get_actions(Observation(x, task_id=k))) <= {2 * k, 2 * k + 1}


def test_get_actions_deterministic():
    s = _sl(n=2, steps=20)
    m, spec = _configure("base", s)
    _train_phases(m, s, spec, 1)
    obs = Observation(np.random.default_rng(0).normal(size=(10, 16)))
    assert np.array_equal(m.get_actions(obs), m.get_actions(obs))


def test_missing_task_id_without_inference():
    s = _sl("task_incremental_sl", n=2, steps=10)
    m, _ = _configure("base", s)
    with pytest.raises(ValueError, match="task_id"):
        m.get_actions(Observation(np.zeros((1, 16))))


# -- on_task_switch ----------------------------------------------------------


def test_fine_tuning_switch_is_noop():
    s = _sl(n=2, steps=20)
    m, spec = _configure("base", s)
    _train_phases(m, s, spec, 1)
    before = _params(m)
    assert m.on_task_switch(None) is m
    assert all(np.array_equal(a, b) for a, b in zip(before, _params(m)))
    assert m.ewc_state is None


def test_ewc_anchors_equal_parameters_after_switch():
    s = _sl(n=2, steps=50)
    m, spec = _configure("ewc", s)
    _train_phases(m, s, spec, 1)
    m.on_task_switch(None)
    assert m.ewc_state
    net_params = m.heads[0].parameters()
    assert len(m.ewc_state) == len(net_params)
    for (p, anchor, f), q in zip(m.ewc_state, net_params):
        assert p is q and np.array_equal(anchor, q) and np.all(f >= 0)
    assert m.ewc_penalty() == 0.0


def test_ewc_reduces_drift():
    s = _sl(n=2, steps=100)
    ewc, spec = _configure("ewc", s, ewc_lambda=100.0)
    plain, _ = _configure("ewc", s, ewc_lambda=0.0)
    _train_phases(ewc, s, spec, 2)
    _train_phases(plain, s, spec, 2)
    drift_plain = sum((f * (q - a) ** 2).sum()
                      for (_, a, f), q in zip(ewc.ewc_state, plain.heads[0].parameters()))
    assert 0 < ewc.ewc_penalty() < drift_plain


def test_rl_ewc_anchors():
    s = Setting.create("incremental_rl", "gridworld", 2, 200)
    m, spec = _configure("ewc", s)
    _train_phases(m, s, spec, 1)
    m.on_task_switch(None)
    (table, anchor, f), = m.ewc_state
    assert np.array_equal(anchor, table.values[:len(table)])
    assert f.max() == 1.0 and f.min() >= 0


# -- task inference ----------------------------------------------------------


def _heads_method(confident):
    s = _sl(n=2, steps=10)
    m, _ = _configure("base", s, task_inference=True)
    m.heads[1] = DenseNet.zeros(m.heads[0].sizes)
    w = np.zeros_like(m.heads[0].weights[-1])
    w[0] = 100.0
    m.heads[0] = DenseNet([m.heads[0].weights[0], w], [m.heads[0].biases[0], np.zeros(2)])
    m.trained_heads = {0, 1} if confident else {0}
    return m


def test_infer_single_head():
    m = _heads_method(False)
    assert m.infer_task(np.ones(16)) == 0


def test_infer_prefers_confident_head():
    m = _heads_method(True)
    x = np.abs(np.random.default_rng(0).normal(size=(20, 16)))
    # head 1 is all zeros: uniform prediction, maximal entropy
    assert np.all(m.infer_task(x) == 0)


def test_infer_needs_a_trained_head():
    s = _sl(n=2, steps=10)
    m, _ = _configure("base", s, task_inference=True)
    with pytest.raises(RuntimeError):
        m.infer_task(np.zeros(16))


def test_task_inference_accuracy_on_separated_tasks():
    s = _sl(n=5, steps=200, sigma=0.05)
    m, spec = _configure("base", s, task_inference=True)
    assert m.multi_head and m.task_inference
    _train_phases(m, s, spec, 5)
    rng = np.random.default_rng(7)
    xs, ts = [], []
    protos = []
    for k, ctx in enumerate(spec.schedule.anchors):
        x, _ = passive.sample_passive(ctx, rng, 200, sigma=0.05, disjoint_actions=True)
        xs.append(x)
        ts.append(np.full(200, k))
        protos.append(ctx.values.reshape(2, -1))
    x, t = np.vstack(xs), np.concatenate(ts)
    # prototype-distance oracle: task of the nearest prototype
    P = np.vstack(protos)
    nearest = np.argmin(((x[:, None] - P[None]) ** 2).sum(-1), axis=1) // 2
    oracle_acc = np.mean(nearest == t)
    acc = np.mean(m.infer_task(x) == t)
    assert oracle_acc >= 0.99
    assert acc >= 0.9


# -- replay buffer -----------------------------------------------------------


def test_under_capacity_keeps_everything():
    b = ReplayBuffer(10)
    rng = np.random.default_rng(0)
    for i in range(7):
        b.insert(i, rng)
    assert b.items == list(range(7))
    assert set(b.sample(7, rng)) == set(range(7))


class _Draws:
    """Replays pre-generated bounded integers; ``integers(k)`` must match the stored bound."""

    def __init__(self, values, highs):
        self._it = iter(zip(values.tolist(), highs.tolist()))

    def integers(self, high):
        v, h = next(self._it)
        assert h == high
        return v


@pytest.mark.slow
def test_reservoir_retention_uniform():
    """10^5 inserts into capacity 100, 500 trials, retention by decile of arrival."""
    n, cap, trials = 100_000, 100, 500
    highs = np.arange(cap + 1, n + 1)  # the buffer draws integers(seen + 1) once full
    counts = np.zeros(10)
    for trial in range(trials):
        rng = np.random.default_rng(trial)
        draws = _Draws(rng.integers(0, highs), highs)
        b = ReplayBuffer(cap)
        for i in range(n):
            b.insert(i, draws)
        counts += np.bincount(np.asarray(b.items) // (n // 10), minlength=10)
    expected = trials * cap / 10
    sd = np.sqrt(trials * cap * 0.1 * 0.9)
    assert np.all(np.abs(counts - expected) < 3 * sd)


def test_replay_errors():
    with pytest.raises(ValueError):
        ReplayBuffer(0)
    b = ReplayBuffer(3)
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError, match="empty"):
        b.sample(1, rng)
    b.insert(1, rng)
    with pytest.raises(ValueError):
        b.sample(2, rng)


def test_replay_mixes_half_and_half():
    s = _sl(n=2, steps=20)
    m, spec = _configure("replay", s)
    seen = []
    orig = dense.backward_ce

    def spy(net, x, labels, allowed=None, weight=1.0):
        seen.append(len(labels))
        return orig(net, x, labels, allowed, weight)

    _train_phases(m, s, spec, 1)
    dense.backward_ce = spy
    try:
        m.on_task_switch(None)
        m.fit(s.train_env(spec, 0, 1))
    finally:
        dense.backward_ce = orig
    # every step: 32 current samples + 32 replayed samples (possibly split by group)
    assert sum(seen) == 2 * 32 * 20
