"""Run a config over its seeds and persist per-seed results plus a run record."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .. import __version__
from ..evaluation.protocol import Setting, apply
from ..evaluation.results import Results
from ..methods.registry import make_descriptor
from .config import ConfigError, ExperimentConfig, from_dict

log = logging.getLogger(__name__)

SEED_ENV = "CL_SEED_OVERRIDE"


class RunFailure(RuntimeError):
    """At least one seed failed; the records are still written."""

    def __init__(self, message: str, run_dir: Path):
        super().__init__(message)
        self.run_dir = run_dir


def atomic_write(path, text: str) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def seed_override(cfg: ExperimentConfig, env=None) -> ExperimentConfig:
    """Replace the seed list with ``CL_SEED_OVERRIDE`` (comma separated) when set."""
    env = os.environ if env is None else env
    raw = env.get(SEED_ENV, "").strip()
    if not raw:
        return cfg
    try:
        seeds = [int(s) for s in raw.split(",") if s.strip()]
    except ValueError:
        raise ConfigError("malformed", f"{SEED_ENV} must be comma-separated integers") from None
    if not seeds or any(s < 0 for s in seeds) or len(set(seeds)) != len(seeds):
        raise ConfigError("malformed", f"{SEED_ENV} must list distinct non-negative integers")
    d = cfg.to_dict()
    d["seeds"] = seeds
    return ExperimentConfig(**d)


def build_setting(cfg: ExperimentConfig) -> Setting:
    env = dict(cfg.environment)
    return Setting.create(cfg.setting, env.pop("family"), env.pop("num_tasks"),
                          env.pop("steps_per_phase"), env.pop("schedule"), **env)


def run_seed(cfg_dict: dict, seed: int) -> dict:
    """Worker body: one seed, returned as a JSON-ready dict (never raises)."""
    t0 = time.perf_counter()
    try:
        cfg = from_dict(cfg_dict)  # re-registers plugins inside worker processes
        setting = build_setting(cfg)
        desc = make_descriptor(cfg.method, cfg.hyperparameters)
        res = apply(setting, desc, seed, cfg.to_dict())
        return res.to_dict()
    except Exception as err:
        log.error("seed %d failed: %s", seed, err)
        return {"config": cfg_dict, "seed": seed, "status": "failed",
                "diagnostic": f"{type(err).__name__}: {err}",
                "traceback": traceback.format_exc(), "matrix": None, "scalars": None,
                "wall_time_seconds": time.perf_counter() - t0}


def config_hash(cfg: ExperimentConfig) -> str:
    d = cfg.to_dict()
    d.pop("output_dir", None)
    return hashlib.sha1(json.dumps(d, sort_keys=True).encode()).hexdigest()[:10]


def _run_dir(out: Path, cfg: ExperimentConfig) -> tuple[str, Path]:
    base = f"{cfg.method}__{cfg.setting}__{cfg.family}__{config_hash(cfg)}"
    run_id, k = base, 1
    while (out / run_id).exists():
        k += 1
        run_id = f"{base}-{k}"
    return run_id, out / run_id


def _aggregate(per_seed: list[dict]) -> dict:
    ok = [r for r in per_seed if r["status"] == "ok"]
    out = {}
    if not ok:
        return out
    for key in ok[0]["scalars"]:
        vals = [r["scalars"][key] for r in ok if r["scalars"][key] is not None]
        if vals:
            out[key] = {"mean": float(np.mean(vals)), "std": float(np.std(vals)), "n": len(vals)}
        else:
            out[key] = None
    rows = np.array([r["matrix"]["rows"] for r in ok])
    out["matrix_mean"] = rows.mean(axis=0).tolist()
    out["wall_time_seconds"] = {"mean": float(np.mean([r["wall_time_seconds"] for r in ok])),
                                "std": float(np.std([r["wall_time_seconds"] for r in ok])),
                                "n": len(ok)}
    return out


def run(cfg: ExperimentConfig, jobs: int = 1, out=None) -> Path:
    """Execute every seed; returns the run directory. Raises :class:`RunFailure`
    after writing everything if any seed failed."""
    cfg = seed_override(cfg)
    out = Path(out if out is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    run_id, run_dir = _run_dir(out, cfg)
    run_dir.mkdir(parents=True)
    atomic_write(run_dir / "config.json", cfg.to_json() + "\n")
    t0 = time.perf_counter()
    cfg_dict = cfg.to_dict()
    if jobs > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(cfg.seeds))) as pool:
            per_seed = list(pool.map(run_seed, [cfg_dict] * len(cfg.seeds), cfg.seeds))
    else:
        per_seed = [run_seed(cfg_dict, s) for s in cfg.seeds]
    files = []
    for res in per_seed:
        name = f"seed_{res['seed']}.json"
        atomic_write(run_dir / name, json.dumps(res, indent=2, sort_keys=True) + "\n")
        if res["status"] == "ok":
            atomic_write(run_dir / f"seed_{res['seed']}_matrix.csv",
                         Results.from_dict(res).matrix.to_csv())
        files.append(name)
    failed = [r["seed"] for r in per_seed if r["status"] != "ok"]
    record = {
        "run_id": run_id,
        "config": cfg_dict,
        "seeds": cfg.seeds,
        "seed_files": files,
        "status": "failed" if failed else "ok",
        "failed_seeds": failed,
        "metric_kind": next((r["matrix"]["metric_kind"] for r in per_seed if r["matrix"]), None),
        "aggregate": _aggregate(per_seed),
        "wall_time_seconds": time.perf_counter() - t0,
        "framework_version": __version__,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    atomic_write(run_dir / "record.json",
                 json.dumps(record, indent=2, sort_keys=True, allow_nan=True) + "\n")
    log.info("wrote %s", run_dir)
    if failed:
        raise RunFailure(f"seeds {failed} failed; see {run_dir}", run_dir)
    return run_dir


def load_record(run_dir) -> dict:
    with open(Path(run_dir) / "record.json") as f:
        return json.load(f)

