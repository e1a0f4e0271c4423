"""Method lifecycle and the shipped learners."""

from .base import BaseMethod, Method, RandomMethod, SettingDescription, defaults_for
from .registry import (
    MethodEntry,
    configure,
    get_method,
    make_descriptor,
    method_names,
    register_method,
    resolved_hyperparameters,
    unregister_method,
)
from .replay import ReplayBuffer, replay_insert, replay_sample

__all__ = [
    "BaseMethod", "Method", "MethodEntry", "RandomMethod", "ReplayBuffer", "SettingDescription",
    "configure", "defaults_for", "get_method", "make_descriptor", "method_names",
    "register_method", "replay_insert", "replay_sample", "resolved_hyperparameters",
    "unregister_method",
]
