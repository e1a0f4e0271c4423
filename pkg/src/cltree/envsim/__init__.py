"""Nonstationary environments as restricted hidden-mode MDPs."""

from .cartpole import sample_task_cartpole, step_cartpole
from .environment import (
    ConfigurationError,
    Environment,
    EnvironmentSpec,
    Feedback,
    FixedSource,
    Monitor,
    Observation,
    ScheduleSource,
    build_spec,
    check_schedule,
    make_raw_env,
    wrap_for_setting,
)
from .families import FAMILIES, get_family
from .gridworld import load_layouts, optimal_return, step_gridworld
from .passive import load_csv_dataset, sample_passive, split_by_class
from .schedule import ContextSchedule, ContextVector, ScheduleKind, context_at, make_schedule

__all__ = [
    "FAMILIES", "ConfigurationError", "ContextSchedule", "ContextVector", "Environment",
    "EnvironmentSpec", "Feedback", "FixedSource", "Monitor", "Observation", "ScheduleKind",
    "ScheduleSource", "build_spec", "check_schedule", "context_at", "get_family",
    "load_csv_dataset", "load_layouts", "make_raw_env", "make_schedule", "optimal_return",
    "sample_passive", "sample_task_cartpole", "split_by_class", "step_cartpole",
    "step_gridworld", "wrap_for_setting",
]
