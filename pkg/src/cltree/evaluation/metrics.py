"""Scalar summaries of a transfer matrix and an online curve.

``R[i][j]`` is test performance on task ``j`` after training phase ``i``.
Every function here is pure, so stored scalars can be recomputed on load.
"""

from __future__ import annotations

import numpy as np

WINDOW = 100


def _matrix(R) -> np.ndarray:
    R = np.asarray(R, dtype=np.float64)
    if R.ndim != 2 or R.size == 0:
        raise ValueError("transfer matrix must be a non-empty 2-d array")
    return R


def final_performance(R) -> float:
    """Mean of the last row."""
    return float(np.mean(_matrix(R)[-1]))


def backward_transfer(R) -> float | None:
    """Mean change on earlier tasks between learning them and the end; ``None`` for one row."""
    R = _matrix(R)
    T = R.shape[0]
    if T < 2:
        return None
    if R.shape[1] < T:
        raise ValueError("backward transfer needs a square (or wider) matrix")
    return float(np.mean([R[T - 1, j] - R[j, j] for j in range(T - 1)]))


def forward_transfer(R, baseline) -> float | None:
    """Mean zero-shot gain over chance on the next task; ``None`` for one row."""
    R = _matrix(R)
    T = R.shape[0]
    if T < 2:
        return None
    if R.shape[1] < T:
        raise ValueError("forward transfer needs a square (or wider) matrix")
    baseline = np.asarray(baseline, dtype=np.float64).reshape(-1)
    if baseline.shape[0] != R.shape[1]:
        raise ValueError("need one chance value per task")
    return float(np.mean([R[j - 1, j] - baseline[j] for j in range(1, T)]))


def online_performance(curve) -> float | None:
    """Average of the windowed training-stream values."""
    values = [v for _, v in curve]
    if not values:
        return None
    return float(np.mean(values))


def all_scalars(R, baseline, curve) -> dict:
    return {
        "final_performance": final_performance(R),
        "backward_transfer": backward_transfer(R),
        "forward_transfer": forward_transfer(R, baseline),
        "online_performance": online_performance(curve),
    }
