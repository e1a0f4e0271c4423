"""Configuration, orchestration, persistence and reporting."""

from .config import ConfigError, ExperimentConfig, load_config, parse_config, serialize
from .plugins import PluginError, PluginMethod, load_manifest, register_plugin, unregister_plugin
from .report import ReportError, report
from .runner import RunFailure, atomic_write, run

__all__ = [
    "ConfigError", "ExperimentConfig", "load_config", "parse_config", "serialize",
    "PluginError", "PluginMethod", "load_manifest", "register_plugin", "unregister_plugin",
    "ReportError", "report", "RunFailure", "atomic_write", "run",
]
