"""Name -> method factory table shared by the CLI, the protocol and plugins."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from ..taxonomy import (
    ROOT,
    Branch,
    MethodDescriptor,
    TaxonomyError,
    check_applicable,
    get_setting,
    validate_descriptor,
)
from .base import BaseMethod, Method, RandomMethod, SettingDescription


@dataclass
class MethodEntry:
    name: str
    target: str
    factory: Callable
    defaults: Callable[[Branch], dict]
    description: str = ""
    plugin: dict | None = None


def _none(branch):
    return {}


def _ewc_defaults(branch):
    return {"ewc_lambda": 100.0 if branch is Branch.PASSIVE else 1.0}


def _replay_defaults(branch):
    return {"replay_capacity": 500 if branch is Branch.PASSIVE else 5000}


_REGISTRY: dict[str, MethodEntry] = {}


def register_method(entry: MethodEntry) -> MethodEntry:
    if entry.name in _REGISTRY:
        raise TaxonomyError(f"duplicate method name {entry.name!r}")
    get_setting(entry.target)
    _REGISTRY[entry.name] = entry
    return entry


def unregister_method(name: str) -> None:
    _REGISTRY.pop(name, None)


for _entry in (
    MethodEntry("base", ROOT, BaseMethod, _none,
                "fine-tuning; multi-head when task ids are observed"),
    MethodEntry("ewc", ROOT, BaseMethod, _ewc_defaults,
                "fine-tuning plus a Fisher-weighted pull toward earlier solutions"),
    MethodEntry("replay", ROOT, BaseMethod, _replay_defaults,
                "fine-tuning on current data mixed with a reservoir of past data"),
    MethodEntry("random", ROOT, RandomMethod, _none,
                "frozen uniform policy; never updates"),
):
    register_method(_entry)


def method_names() -> list[str]:
    return list(_REGISTRY)


def get_method(name: str) -> MethodEntry:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise TaxonomyError(f"unknown method {name!r}") from None


def make_descriptor(name: str, hyperparameters: dict | None = None) -> MethodDescriptor:
    entry = get_method(name)
    desc = MethodDescriptor(name, get_setting(entry.target).assumptions,
                            dict(hyperparameters or {}))
    validate_descriptor(desc)
    return desc


def resolved_hyperparameters(name: str, branch: Branch, given: dict | None = None) -> dict:
    """Method-specific defaults overlaid with ``given``."""
    hp = get_method(name).defaults(branch)
    hp.update(given or {})
    return hp


def configure(descriptor: MethodDescriptor, setting: SettingDescription, seed: int = 0) -> Method:
    """Instantiate ``descriptor`` for ``setting``; refuses inapplicable pairs."""
    check_applicable(descriptor, setting.assumptions)
    entry = get_method(descriptor.name)
    hp = resolved_hyperparameters(descriptor.name, setting.branch, descriptor.hyperparameters)
    resolved = MethodDescriptor(descriptor.name, descriptor.target, hp)
    return entry.factory(resolved, setting, seed)
