"""Transfer matrices and per-seed results, with JSON and CSV persistence."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import metrics

METRIC_KINDS = ("accuracy", "mean_episode_return")


class ResultsError(ValueError):
    pass


@dataclass
class TransferMatrix:
    rows: np.ndarray
    metric_kind: str = "accuracy"

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        if self.metric_kind not in METRIC_KINDS:
            raise ResultsError(f"metric kind must be one of {METRIC_KINDS}")
        if self.rows.ndim != 2 or self.rows.size == 0:
            raise ResultsError("transfer matrix must be a non-empty 2-d array")
        if self.metric_kind == "accuracy":
            finite = self.rows[np.isfinite(self.rows)]
            if np.any((finite < 0) | (finite > 1)):
                raise ResultsError("accuracies must lie in [0, 1]")

    @property
    def shape(self):
        return self.rows.shape

    def to_dict(self) -> dict:
        return {"metric_kind": self.metric_kind, "rows": self.rows.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "TransferMatrix":
        return cls(np.asarray(d["rows"], dtype=np.float64), d["metric_kind"])

    def to_csv(self) -> str:
        """Header row and first column carry task / phase indices."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["phase"] + [f"task_{j}" for j in range(self.rows.shape[1])])
        for i, row in enumerate(self.rows):
            w.writerow([i] + [repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, metric_kind: str = "accuracy") -> "TransferMatrix":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0][0] != "phase":
            raise ResultsError("missing header row")
        return cls(np.array([[float(v) for v in r[1:]] for r in rows[1:]]), metric_kind)


def _finite_or_none(x):
    if x is None:
        return None
    return float(x)


@dataclass
class Results:
    matrix: TransferMatrix
    chance: list[float]
    online_curve: list[tuple[int, float]]
    config: dict = field(default_factory=dict)
    seed: int = 0
    wall_time_seconds: float = 0.0
    status: str = "ok"
    diagnostic: str | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def scalars(self) -> dict:
        return metrics.all_scalars(self.matrix.rows, self.chance, self.online_curve)

    @property
    def final_performance(self) -> float:
        return metrics.final_performance(self.matrix.rows)

    @property
    def backward_transfer(self):
        return metrics.backward_transfer(self.matrix.rows)

    @property
    def forward_transfer(self):
        return metrics.forward_transfer(self.matrix.rows, self.chance)

    @property
    def online_performance(self):
        return metrics.online_performance(self.online_curve)

    def finite(self) -> bool:
        vals = list(self.matrix.rows.ravel()) + [v for v in self.scalars.values() if v is not None]
        return all(math.isfinite(v) for v in vals)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "seed": self.seed,
            "status": self.status,
            "diagnostic": self.diagnostic,
            "matrix": self.matrix.to_dict(),
            "chance": [float(c) for c in self.chance],
            "online_curve": [[int(s), float(v)] for s, v in self.online_curve],
            "scalars": {k: _finite_or_none(v) for k, v in self.scalars.items()},
            "diagnostics": self.diagnostics,
            "wall_time_seconds": self.wall_time_seconds,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=True)

    @classmethod
    def from_dict(cls, d: dict, verify: bool = True) -> "Results":
        r = cls(TransferMatrix.from_dict(d["matrix"]), list(d["chance"]),
                [(int(s), float(v)) for s, v in d["online_curve"]], d.get("config", {}),
                d.get("seed", 0), d.get("wall_time_seconds", 0.0), d.get("status", "ok"),
                d.get("diagnostic"), d.get("diagnostics", {}))
        if verify and r.status == "ok":
            stored = d.get("scalars", {})
            for k, v in r.scalars.items():
                if stored.get(k) != v:
                    raise ResultsError(f"stored {k}={stored.get(k)!r} does not match "
                                       f"the recomputed value {v!r}")
        return r

    @classmethod
    def from_json(cls, text: str, verify: bool = True) -> "Results":
        return cls.from_dict(json.loads(text), verify)

    @classmethod
    def load(cls, path, verify: bool = True) -> "Results":
        with open(path) as f:
            return cls.from_json(f.read(), verify)
