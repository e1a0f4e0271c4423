"""Experiment configuration: JSON in, validated and fully explicit config out."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from ..envsim import passive
from ..envsim.environment import ConfigurationError
from ..envsim.families import FAMILIES, get_family
from ..evaluation.protocol import ENV_KEYS, default_schedule
from ..methods.base import FAMILY_GAMMA, BaseMethod, defaults_for
from ..methods.registry import get_method, make_descriptor, resolved_hyperparameters
from ..taxonomy import Branch, ContextObs, NotApplicableError, TaxonomyError, check_applicable, get_setting


class ConfigError(ValueError):
    """Invalid experiment configuration; ``code`` says which kind."""

    CODES = ("unknown_setting", "unknown_method", "inapplicable", "malformed")

    def __init__(self, code: str, message: str):
        if code not in self.CODES:
            raise ValueError(f"unknown config error code {code!r}")
        super().__init__(f"[{code}] {message}")
        self.code = code


DEFAULT_TASKS = 5
DEFAULT_STEPS = {"synthetic_gaussian": 200, "split_csv": 200, "gridworld": 4000,
                 "cartpole": 50000}


@dataclass
class ExperimentConfig:
    setting: str
    method: str
    hyperparameters: dict
    environment: dict
    seeds: list[int]
    output_dir: str = "runs"
    plugins: list[str] = field(default_factory=list)
    reference_method: str = "base"  # runtime normalization reference in reports

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @property
    def family(self) -> str:
        return self.environment["family"]


def _require(cond, msg):
    if not cond:
        raise ConfigError("malformed", msg)


def _int(value, name, minimum=None) -> int:
    _require(isinstance(value, int) and not isinstance(value, bool), f"{name} must be an integer")
    if minimum is not None:
        _require(value >= minimum, f"{name} must be >= {minimum}")
    return value


def fill_environment(setting_name: str, env: dict) -> dict:
    """Every environment field made explicit, with the defaults applied."""
    node = get_setting(setting_name)
    _require("family" in env, "environment.family is required")
    family = env["family"]
    if family not in FAMILIES:
        raise ConfigError("malformed", f"unknown environment family {family!r}; "
                          f"known: {sorted(FAMILIES)}")
    unknown = set(env) - set(ENV_KEYS)
    _require(not unknown, f"unknown environment fields {sorted(unknown)}")
    trunk = node.trunk
    num_tasks = _int(env.get("num_tasks", 1 if trunk == "traditional" else DEFAULT_TASKS),
                     "environment.num_tasks", 1)
    steps = _int(env.get("steps_per_phase", DEFAULT_STEPS[family]),
                 "environment.steps_per_phase", 1)
    schedule = env.get("schedule") or default_schedule(node, family, num_tasks).value
    fam = get_family(family)
    out = {
        "family": family,
        "num_tasks": num_tasks,
        "steps_per_phase": steps,
        "schedule": schedule,
        "disjoint_actions": bool(env.get("disjoint_actions", False)),
        "classes_per_task": _int(env.get("classes_per_task", passive.DEFAULT_CLASSES),
                                 "environment.classes_per_task", 2),
        "sigma": float(env.get("sigma", passive.DEFAULT_SIGMA)),
        "observation_dim": env.get("observation_dim",
                                   passive.DEFAULT_DIM if family == "synthetic_gaussian" else None),
        "batch_size": _int(env.get("batch_size", 32), "environment.batch_size", 1),
        "max_episode_len": env.get("max_episode_len"),
        "dataset_path": env.get("dataset_path"),
        "layout_dir": env.get("layout_dir"),
        "transition": env.get("transition"),
    }
    if fam.branch is Branch.ACTIVE and out["max_episode_len"] is None:
        out["max_episode_len"] = 200 if family == "cartpole" else 100
    return out


def fill_hyperparameters(method: str, branch: Branch, family: str, given: dict,
                         task_observed: bool = False) -> dict:
    entry = get_method(method)
    if entry.plugin is not None:
        hp = dict(entry.plugin.get("hyperparameters", {}))
        hp.update(given)
        return hp
    if entry.factory is not BaseMethod:
        return resolved_hyperparameters(method, branch, given)
    hp = defaults_for(branch)
    hp.update(resolved_hyperparameters(method, branch, given))
    unknown = set(hp) - set(defaults_for(branch))
    _require(not unknown, f"unknown hyperparameters for {method}: {sorted(unknown)}")
    if branch is Branch.ACTIVE and hp.get("gamma") is None:
        hp["gamma"] = FAMILY_GAMMA.get(family, 0.99)
    if hp.get("multi_head") is None:
        hp["multi_head"] = bool(task_observed or hp.get("task_inference", False))
    return hp


def from_dict(d: dict) -> ExperimentConfig:
    """Validate a parsed JSON document; raises :class:`ConfigError`."""
    from .plugins import load_manifest, register_plugin

    _require(isinstance(d, dict), "config must be a JSON object")
    known = {"setting", "method", "hyperparameters", "environment", "family", "seeds",
             "output_dir", "plugins", "reference_method"}
    unknown = set(d) - known
    _require(not unknown, f"unknown top-level fields {sorted(unknown)}")
    plugins = d.get("plugins", [])
    _require(isinstance(plugins, list) and all(isinstance(p, str) for p in plugins),
             "plugins must be a list of manifest paths")
    for path in plugins:
        try:
            register_plugin(load_manifest(path), exist_ok=True)
        except (OSError, ValueError) as err:
            raise ConfigError("malformed", f"plugin manifest {path}: {err}") from None
    _require(isinstance(d.get("setting"), str), "setting must be a string")
    try:
        node = get_setting(d["setting"])
    except TaxonomyError as err:
        raise ConfigError("unknown_setting", str(err)) from None
    if node.abstract:
        raise ConfigError("unknown_setting",
                          f"{node.name!r} is abstract; use {node.name}_sl or {node.name}_rl")
    method = d.get("method")
    given_hp = d.get("hyperparameters", {})
    if isinstance(method, dict):
        given_hp = {**method.get("hyperparameters", {}), **given_hp}
        method = method.get("name")
    _require(isinstance(method, str), "method must be a name or {name, hyperparameters}")
    _require(isinstance(given_hp, dict), "hyperparameters must be an object")
    try:
        desc = make_descriptor(method, given_hp)
    except TaxonomyError as err:
        raise ConfigError("unknown_method", str(err)) from None
    try:
        check_applicable(desc, node.assumptions)
    except NotApplicableError as err:
        raise ConfigError("inapplicable", str(err)) from None
    env = dict(d.get("environment", {}))
    _require(isinstance(env, dict), "environment must be an object")
    if "family" in d:
        _require("family" not in env or env["family"] == d["family"],
                 "family given twice with different values")
        env["family"] = d["family"]
    env = fill_environment(node.name, env)
    fam = get_family(env["family"])
    if fam.branch is not node.assumptions.branch:
        raise ConfigError("malformed", f"family {fam.name!r} is {fam.branch.value} but "
                          f"setting {node.name!r} is {node.assumptions.branch.value}")
    from ..envsim.environment import check_schedule
    from ..envsim.schedule import ScheduleKind

    try:
        check_schedule(node.assumptions, ScheduleKind(env["schedule"]))
    except (ConfigurationError, ValueError) as err:
        raise ConfigError("malformed", f"schedule: {err}") from None
    hp = fill_hyperparameters(method, node.assumptions.branch, env["family"], given_hp,
                              node.assumptions.context_observed is ContextObs.OBSERVED)
    seeds = d.get("seeds", [0])
    _require(isinstance(seeds, list) and seeds, "seeds must be a non-empty list")
    seeds = [_int(s, "seed", 0) for s in seeds]
    _require(len(set(seeds)) == len(seeds), "seeds must be distinct")
    out = d.get("output_dir", "runs")
    _require(isinstance(out, str), "output_dir must be a string")
    ref = d.get("reference_method", "base")
    _require(isinstance(ref, str) and ref, "reference_method must be a method name")
    return ExperimentConfig(node.name, method, hp, env, seeds, out, list(plugins), ref)


def parse_config(text: str) -> ExperimentConfig:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError("malformed", f"not valid JSON: {err}") from None
    return from_dict(d)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as f:
            text = f.read()
    except OSError as err:
        raise ConfigError("malformed", f"cannot read {path}: {err}") from None
    return parse_config(text)


def serialize(cfg: ExperimentConfig) -> str:
    return cfg.to_json()
