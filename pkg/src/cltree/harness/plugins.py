"""Out-of-process methods speaking line-delimited JSON over stdin/stdout.

A manifest is a JSON object ``{name, target, command, hyperparameters}``.
``command`` is an argv list (or a string split with shlex), resolved
relative to the manifest's directory. Every message is one JSON object per
line. The harness sends:

``configure``    ``{setting, hyperparameters, seed}``; plugin answers ``{"type": "ready"}``
``act``          ``{observation, training}``; plugin answers ``{"type": "action", "action": a}``
``feedback``     ``{observation, action, reward, label, next_observation}``; no answer
``task_switch``  ``{task_id}``; no answer
``close``        plugin exits

``action`` is an int for active settings and a list of ints for passive ones.
A plugin may answer any request with ``{"type": "error", "message": ...}``.
"""

from __future__ import annotations

import json
import os
import shlex
import subprocess
import sys
from pathlib import Path

import numpy as np

from ..methods.base import Method
from ..methods.registry import MethodEntry, get_method, register_method, unregister_method
from ..taxonomy import Branch, TaxonomyError, get_setting

PROTOCOL_VERSION = 1


class PluginError(RuntimeError):
    pass


def load_manifest(path) -> dict:
    path = Path(path)
    with open(path) as f:
        m = json.load(f)
    if not isinstance(m, dict):
        raise ValueError("manifest must be a JSON object")
    missing = {"name", "target", "command"} - set(m)
    if missing:
        raise ValueError(f"manifest missing {sorted(missing)}")
    cmd = m["command"]
    if isinstance(cmd, str):
        cmd = shlex.split(cmd)
    if not cmd or not all(isinstance(c, str) for c in cmd):
        raise ValueError("command must be a non-empty argv list")
    base = path.resolve().parent
    # argv entries naming files next to the manifest become absolute paths
    cmd = [str(base / c) if not os.path.isabs(c) and (base / c).exists() else c for c in cmd]
    if cmd[0] in ("python", "python3"):
        cmd[0] = sys.executable
    hp = m.get("hyperparameters", {})
    if not isinstance(hp, dict):
        raise ValueError("hyperparameters must be an object")
    return {"name": str(m["name"]), "target": str(m["target"]), "command": cmd,
            "hyperparameters": hp, "path": str(path.resolve())}


def register_plugin(manifest: dict, exist_ok: bool = False) -> MethodEntry:
    """Add a plugin to the method registry; duplicate names and unknown targets are rejected."""
    name = manifest["name"]
    try:
        existing = get_method(name)
    except TaxonomyError:
        existing = None
    if existing is not None:
        if exist_ok and existing.plugin is not None and existing.plugin == manifest:
            return existing
        raise TaxonomyError(f"duplicate method name {name!r}")
    get_setting(manifest["target"])  # raises on unknown targets

    def factory(descriptor, setting, seed=0):
        return PluginMethod(descriptor, setting, seed, manifest)

    entry = MethodEntry(name, manifest["target"], factory,
                        lambda branch: dict(manifest.get("hyperparameters", {})),
                        f"plugin: {' '.join(manifest['command'])}", plugin=manifest)
    return register_method(entry)


def unregister_plugin(name: str) -> None:
    unregister_method(name)


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot encode {type(o).__name__}")


class PluginMethod(Method):
    """Proxy that forwards the method lifecycle to a subprocess."""

    def __init__(self, descriptor, setting, seed, manifest, timeout: float = 60.0):
        super().__init__(descriptor, setting, seed)
        self.manifest = manifest
        self.timeout = timeout
        try:
            self.proc = subprocess.Popen(manifest["command"], stdin=subprocess.PIPE,
                                         stdout=subprocess.PIPE, text=True, bufsize=1)
        except OSError as err:
            raise PluginError(f"cannot start plugin {manifest['name']!r}: {err}") from None
        reply = self._request({"type": "configure", "version": PROTOCOL_VERSION,
                               "setting": setting.to_dict(),
                               "hyperparameters": self.hp, "seed": int(seed)})
        if reply.get("type") != "ready":
            raise PluginError(f"plugin answered configure with {reply!r}")

    def _send(self, msg: dict):
        if self.proc.poll() is not None:
            raise PluginError(f"plugin {self.manifest['name']!r} exited "
                              f"with code {self.proc.returncode}")
        try:
            self.proc.stdin.write(json.dumps(msg, default=_json_default) + "\n")
            self.proc.stdin.flush()
        except BrokenPipeError:
            raise PluginError(f"plugin {self.manifest['name']!r} closed its input") from None

    def _request(self, msg: dict) -> dict:
        self._send(msg)
        line = self.proc.stdout.readline()
        if not line:
            raise PluginError(f"plugin {self.manifest['name']!r} sent no reply to {msg['type']}")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError:
            raise PluginError(f"plugin sent malformed JSON: {line[:200]!r}") from None
        if reply.get("type") == "error":
            raise PluginError(f"plugin error: {reply.get('message')}")
        return reply

    def _act(self, obs, training: bool):
        reply = self._request({"type": "act", "observation": obs.to_dict(), "training": training})
        if reply.get("type") != "action":
            raise PluginError(f"expected an action, got {reply!r}")
        a = reply["action"]
        if self.setting.branch is Branch.PASSIVE:
            return np.asarray(a, dtype=np.int64).reshape(-1)
        return int(a)

    def get_actions(self, observations, action_space=None):
        return self._act(observations, training=False)

    def fit(self, train_env, valid_env=None):
        self._send({"type": "begin_phase"})
        obs = train_env.reset()
        while True:
            a = self._act(obs, training=True)
            nxt, fb = train_env.step(a)
            self._send({"type": "feedback", "observation": obs.to_dict(), "action": a,
                        **fb.to_dict(), "next_observation": nxt.to_dict()})
            self.n_updates += 1
            if train_env.exhausted:
                return self
            obs = train_env.reset() if nxt.episode_done else nxt

    def on_task_switch(self, task_id):
        self._send({"type": "task_switch", "task_id": task_id})
        return self

    def close(self):
        proc = getattr(self, "proc", None)
        if proc is None or proc.poll() is not None:
            return
        try:
            self._send({"type": "close"})
            proc.stdin.close()
            proc.wait(timeout=self.timeout)
        except (PluginError, subprocess.TimeoutExpired, OSError):
            proc.kill()
            proc.wait()
        finally:
            if proc.stdout:
                proc.stdout.close()
