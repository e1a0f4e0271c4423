from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Discrete:
    n: int

    def contains(self, a) -> bool:
        return 0 <= int(a) < self.n

    def to_dict(self) -> dict:
        return {"type": "discrete", "n": self.n}


@dataclass(frozen=True)
class Box:
    shape: tuple[int, ...]
    low: float
    high: float

    def to_dict(self) -> dict:
        return {"type": "box", "shape": list(self.shape), "low": self.low, "high": self.high}


@dataclass(frozen=True)
class MultiBinary:
    n: int

    def to_dict(self) -> dict:
        return {"type": "multi_binary", "n": self.n}


def space_from_dict(d: dict):
    kind = d["type"]
    if kind == "discrete":
        return Discrete(int(d["n"]))
    if kind == "box":
        return Box(tuple(d["shape"]), float(d["low"]), float(d["high"]))
    if kind == "multi_binary":
        return MultiBinary(int(d["n"]))
    raise ValueError(f"unknown space type {kind!r}")
