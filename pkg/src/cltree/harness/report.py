"""Aggregate run directories into comparison and plot-data CSV files."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..evaluation.results import Results, TransferMatrix
from .runner import atomic_write, load_record

SCALARS = ("final_performance", "backward_transfer", "forward_transfer", "online_performance")
COMPARISON_COLUMNS = ("method", "setting", "family", "metric_kind", "seeds", "final_mean",
                      "final_std", "bwt_mean", "bwt_std", "fwt_mean", "fwt_std", "online_mean",
                      "online_std", "wall_time_mean", "wall_time_std", "normalized_runtime",
                      "runtime_score")
PLOT_COLUMNS = ("method", "setting", "family", "x_kind", "x", "y_final")


class ReportError(ValueError):
    pass


@dataclass
class RunSummary:
    run_id: str
    run_dir: Path
    method: str
    setting: str
    family: str
    metric_kind: str
    results: list[Results]
    reference_method: str = "base"

    def values(self, key: str) -> list[float]:
        vals = [getattr(r, key) for r in self.results]
        return [v for v in vals if v is not None]

    def stat(self, key: str) -> tuple[float | None, float | None]:
        vals = self.values(key)
        if not vals:
            return None, None
        return float(np.mean(vals)), float(np.std(vals))

    @property
    def wall_times(self) -> list[float]:
        return [r.wall_time_seconds for r in self.results]


def find_runs(paths) -> list[Path]:
    """Run directories under ``paths``: each path is a run directory or contains some."""
    out = []
    for p in map(Path, paths):
        if (p / "record.json").is_file():
            out.append(p)
        elif p.is_dir():
            out.extend(sorted(d for d in p.iterdir() if (d / "record.json").is_file()))
        else:
            raise ReportError(f"{p} is not a run directory")
    if not out:
        raise ReportError("no run records found")
    return out


def load_run(run_dir) -> RunSummary:
    run_dir = Path(run_dir)
    rec = load_record(run_dir)
    results = []
    for name in rec["seed_files"]:
        with open(run_dir / name) as f:
            d = json.load(f)
        if d.get("status") == "ok":
            results.append(Results.from_dict(d))  # verifies the stored scalars
    cfg = rec["config"]
    kind = rec.get("metric_kind") or (results[0].matrix.metric_kind if results else None)
    return RunSummary(rec["run_id"], run_dir, cfg["method"], cfg["setting"],
                      cfg["environment"]["family"], kind, results,
                      cfg.get("reference_method", "base"))


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def runtime_score(t: float, min_runtime: float, max_runtime: float) -> float:
    """1 at or below ``min_runtime``, 0 at or above ``max_runtime``, linear between."""
    if max_runtime <= min_runtime:
        raise ReportError("max_runtime must exceed min_runtime")
    return float(np.clip((max_runtime - t) / (max_runtime - min_runtime), 0.0, 1.0))


def _reference_times(runs: list[RunSummary], reference: str) -> tuple[dict, float | None]:
    """Mean reference wall time per (setting, family), plus the pooled mean."""
    groups: dict = {}
    pooled = []
    for r in runs:
        if r.method == reference and r.results:
            groups.setdefault((r.setting, r.family), []).extend(r.wall_times)
            pooled.extend(r.wall_times)
    means = {k: float(np.mean(v)) for k, v in groups.items()}
    return means, (float(np.mean(pooled)) if pooled else None)


def comparison_rows(runs: list[RunSummary], reference: str | None = None,
                    reference_time: float | None = None, min_runtime: float | None = None,
                    max_runtime: float | None = None) -> list[dict]:
    kinds = {r.metric_kind for r in runs if r.metric_kind is not None}
    if len(kinds) > 1:
        raise ReportError(f"cannot compare mixed metric kinds {sorted(kinds)}; "
                          "report accuracy and return runs separately")
    reference = reference or runs[0].reference_method
    by_group, pooled = _reference_times(runs, reference)
    rows = []
    for r in runs:
        row = {"method": r.method, "setting": r.setting, "family": r.family,
               "metric_kind": r.metric_kind, "seeds": len(r.results)}
        for key, col in zip(SCALARS, ("final", "bwt", "fwt", "online")):
            row[f"{col}_mean"], row[f"{col}_std"] = r.stat(key)
        wt = r.wall_times
        row["wall_time_mean"] = float(np.mean(wt)) if wt else None
        row["wall_time_std"] = float(np.std(wt)) if wt else None
        ref = reference_time if reference_time is not None else by_group.get(
            (r.setting, r.family), pooled)
        row["normalized_runtime"] = (row["wall_time_mean"] / ref
                                     if ref and row["wall_time_mean"] is not None else None)
        row["runtime_score"] = None
        if min_runtime is not None and max_runtime is not None and wt:
            row["runtime_score"] = runtime_score(row["wall_time_mean"], min_runtime, max_runtime)
        rows.append(row)
    return rows


def _csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([v if isinstance(v, (str, int)) and not isinstance(v, bool) else _fmt(v)
                    for v in (row[c] for c in columns)])
    return buf.getvalue()


def plot_rows(comparison: list[dict]) -> list[dict]:
    out = []
    for row in comparison:
        for x_kind, col in (("runtime", "wall_time_mean"), ("online", "online_mean")):
            if row[col] is not None and row["final_mean"] is not None:
                out.append({"method": row["method"], "setting": row["setting"],
                            "family": row["family"], "x_kind": x_kind, "x": row[col],
                            "y_final": row["final_mean"]})
    return out


def report(run_dirs, out, reference: str | None = None, reference_time: float | None = None,
           min_runtime: float | None = None, max_runtime: float | None = None) -> dict:
    """Write the report bundle to ``out``; returns ``{name: path}``."""
    runs = [load_run(d) for d in find_runs(run_dirs)]
    rows = comparison_rows(runs, reference, reference_time, min_runtime, max_runtime)
    out = Path(out)
    paths = {}
    for r in runs:
        if not r.results:
            continue
        mean = np.mean([res.matrix.rows for res in r.results], axis=0)
        p = out / "matrices" / f"{r.run_id}.csv"
        atomic_write(p, TransferMatrix(mean, r.metric_kind).to_csv())
        paths[f"matrix:{r.run_id}"] = p
    atomic_write(out / "comparison.csv", _csv(COMPARISON_COLUMNS, rows))
    atomic_write(out / "plot_data.csv", _csv(PLOT_COLUMNS, plot_rows(rows)))
    paths["comparison"] = out / "comparison.csv"
    paths["plot_data"] = out / "plot_data.csv"
    return paths
