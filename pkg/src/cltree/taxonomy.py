"""Continual-learning settings as points in an assumption lattice.

A setting is an :class:`AssumptionVector`: one value per assumption axis.
Settings are partially ordered by :func:`axis_leq` (``a <= b`` when ``b``
makes every assumption ``a`` makes, and possibly more). A method declares a
target vector and applies to every setting at or below it in information,
i.e. every descendant of its target.

Hasse edges are computed from the order, never hand-written, so a new
setting only needs its vector to slot into the lattice.
"""

from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable


class Continuity(enum.IntEnum):
    CONTINUOUS = 0
    DISCRETE = 1


class Boundary(enum.IntEnum):
    HIDDEN = 0
    SIGNALED = 1


class ContextObs(enum.IntEnum):
    HIDDEN = 0
    OBSERVED = 1


class Stationarity(enum.IntEnum):
    NONSTATIONARY = 0
    STATIONARY = 1


class Branch(enum.Enum):
    UNSPECIFIED = "unspecified"
    PASSIVE = "passive"
    ACTIVE = "active"


AXES = ("context_continuity", "boundary_signal", "context_observed", "stationarity", "branch")


class TaxonomyError(ValueError):
    pass


class NotApplicableError(TaxonomyError):
    """A method was asked to run on a setting that is not a descendant of its target."""

    def __init__(self, method: str, setting: str, failing_axes: list[str]):
        self.method = method
        self.setting = setting
        self.failing_axes = failing_axes
        super().__init__(
            f"method {method!r} is not applicable to setting {setting!r}: "
            f"failing axis {', '.join(failing_axes)}"
        )


@dataclass(frozen=True)
class AssumptionVector:
    context_continuity: Continuity
    boundary_signal: Boundary
    context_observed: ContextObs
    stationarity: Stationarity
    branch: Branch = Branch.UNSPECIFIED

    def __post_init__(self):
        if self.stationarity is Stationarity.STATIONARY:
            if self.context_continuity is not Continuity.DISCRETE:
                raise TaxonomyError("stationary settings have discrete contexts")
            if self.boundary_signal is not Boundary.SIGNALED:
                raise TaxonomyError("stationary settings have (trivially) signaled boundaries")

    @property
    def abstract(self) -> bool:
        return self.branch is Branch.UNSPECIFIED

    def with_branch(self, branch: Branch) -> "AssumptionVector":
        return AssumptionVector(self.context_continuity, self.boundary_signal,
                                self.context_observed, self.stationarity, branch)

    def to_dict(self) -> dict:
        return {
            "context_continuity": self.context_continuity.name.lower(),
            "boundary_signal": self.boundary_signal.name.lower(),
            "context_observed": self.context_observed.name.lower(),
            "stationarity": self.stationarity.name.lower(),
            "branch": self.branch.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AssumptionVector":
        return cls(
            Continuity[d["context_continuity"].upper()],
            Boundary[d["boundary_signal"].upper()],
            ContextObs[d["context_observed"].upper()],
            Stationarity[d["stationarity"].upper()],
            Branch(d["branch"]),
        )


def _branch_leq(a: Branch, b: Branch) -> bool:
    return a is b or a is Branch.UNSPECIFIED


def failing_axes(a: AssumptionVector, b: AssumptionVector) -> list[str]:
    """Axes on which ``b`` is *not* at least as informative as ``a``."""
    bad = [name for name in AXES[:4] if getattr(a, name) > getattr(b, name)]
    if not _branch_leq(a.branch, b.branch):
        bad.append("branch")
    return bad


def axis_leq(a: AssumptionVector, b: AssumptionVector) -> bool:
    return not failing_axes(a, b)


# Trunk of the tree: (continuity, boundary, context observed, stationarity)
TRUNK = {
    "continuous_task_agnostic": AssumptionVector(
        Continuity.CONTINUOUS, Boundary.HIDDEN, ContextObs.HIDDEN, Stationarity.NONSTATIONARY),
    "discrete_task_agnostic": AssumptionVector(
        Continuity.DISCRETE, Boundary.HIDDEN, ContextObs.HIDDEN, Stationarity.NONSTATIONARY),
    "incremental": AssumptionVector(
        Continuity.DISCRETE, Boundary.SIGNALED, ContextObs.HIDDEN, Stationarity.NONSTATIONARY),
    "task_incremental": AssumptionVector(
        Continuity.DISCRETE, Boundary.SIGNALED, ContextObs.OBSERVED, Stationarity.NONSTATIONARY),
    "traditional": AssumptionVector(
        Continuity.DISCRETE, Boundary.SIGNALED, ContextObs.HIDDEN, Stationarity.STATIONARY),
    "multi_task": AssumptionVector(
        Continuity.DISCRETE, Boundary.SIGNALED, ContextObs.OBSERVED, Stationarity.STATIONARY),
}

BRANCH_SUFFIX = {Branch.PASSIVE: "sl", Branch.ACTIVE: "rl"}

ROOT = "continuous_task_agnostic"


@dataclass(frozen=True)
class SettingNode:
    name: str
    assumptions: AssumptionVector
    parents: tuple[str, ...] = field(default=())

    @property
    def abstract(self) -> bool:
        return self.assumptions.abstract

    @property
    def trunk(self) -> str:
        for suffix in BRANCH_SUFFIX.values():
            if self.name.endswith("_" + suffix):
                return self.name[: -len(suffix) - 1]
        return self.name


@dataclass(frozen=True)
class MethodDescriptor:
    name: str
    target: AssumptionVector
    hyperparameters: dict = field(default_factory=dict, compare=False, hash=False)


def _raw_nodes() -> list[tuple[str, AssumptionVector]]:
    out = list(TRUNK.items())
    for branch, suffix in BRANCH_SUFFIX.items():
        out.extend((f"{name}_{suffix}", vec.with_branch(branch)) for name, vec in TRUNK.items())
    return out


def hasse_edges(vectors: dict[str, AssumptionVector]) -> list[tuple[str, str]]:
    """Covering relation ``(parent, child)`` of the order restricted to ``vectors``."""
    names = list(vectors)
    less = {
        (p, c) for p, c in itertools.permutations(names, 2)
        if axis_leq(vectors[p], vectors[c]) and vectors[p] != vectors[c]
    }
    edges = []
    for p, c in sorted(less):
        if not any((p, m) in less and (m, c) in less for m in names):
            edges.append((p, c))
    return edges


def _build_catalog() -> list[SettingNode]:
    raw = dict(_raw_nodes())
    edges = hasse_edges(raw)
    parents: dict[str, list[str]] = {n: [] for n in raw}
    for p, c in edges:
        parents[c].append(p)
    return [SettingNode(n, v, tuple(sorted(parents[n]))) for n, v in raw.items()]


_CATALOG: list[SettingNode] = _build_catalog()
_BY_NAME: dict[str, SettingNode] = {n.name: n for n in _CATALOG}


def canonical_catalog() -> list[SettingNode]:
    return list(_CATALOG)


def register_setting(name: str, assumptions: AssumptionVector) -> SettingNode:
    """Add a setting to the catalog; parents are recomputed for every node."""
    global _CATALOG, _BY_NAME
    if name in _BY_NAME:
        raise TaxonomyError(f"duplicate setting name {name!r}")
    if any(n.assumptions == assumptions for n in _CATALOG):
        raise TaxonomyError(f"setting {name!r} duplicates an existing assumption vector")
    vectors = {n.name: n.assumptions for n in _CATALOG}
    vectors[name] = assumptions
    edges = hasse_edges(vectors)
    parents: dict[str, list[str]] = {n: [] for n in vectors}
    for p, c in edges:
        parents[c].append(p)
    _CATALOG = [SettingNode(n, v, tuple(sorted(parents[n]))) for n, v in vectors.items()]
    _BY_NAME = {n.name: n for n in _CATALOG}
    return _BY_NAME[name]


def get_setting(name: str) -> SettingNode:
    try:
        return _BY_NAME[name]
    except KeyError:
        raise TaxonomyError(f"unknown setting {name!r}") from None


def concrete_settings() -> list[SettingNode]:
    return [n for n in _CATALOG if not n.abstract]


def name_of(vector: AssumptionVector) -> str:
    for node in _CATALOG:
        if node.assumptions == vector:
            return node.name
    raise TaxonomyError(f"vector {vector} is not in the catalog")


def descendants(target: AssumptionVector, concrete_only: bool = True) -> list[str]:
    return [
        n.name for n in _CATALOG
        if axis_leq(target, n.assumptions) and not (concrete_only and n.abstract)
    ]


def validate_descriptor(method: MethodDescriptor) -> None:
    name_of(method.target)


def is_applicable(method: MethodDescriptor, setting: AssumptionVector) -> bool:
    if setting.abstract:
        raise TaxonomyError("applicability is only defined for concrete settings")
    return axis_leq(method.target, setting)


def check_applicable(method: MethodDescriptor, setting: AssumptionVector) -> None:
    """Raise :class:`NotApplicableError` naming the failing axes."""
    if setting.abstract:
        raise TaxonomyError("applicability is only defined for concrete settings")
    bad = failing_axes(method.target, setting)
    if bad:
        raise NotApplicableError(method.name, name_of(setting), bad)


def lattice_json(nodes: Iterable[SettingNode] | None = None) -> str:
    nodes = list(nodes if nodes is not None else _CATALOG)
    vectors = {n.name: n.assumptions for n in nodes}
    payload = {
        "nodes": [
            {"name": n.name, "abstract": n.abstract, "assumptions": n.assumptions.to_dict(),
             "parents": list(n.parents)}
            for n in nodes
        ],
        "edges": [{"parent": p, "child": c} for p, c in hasse_edges(vectors)],
    }
    return json.dumps(payload, indent=2)


def lattice_dot(nodes: Iterable[SettingNode] | None = None) -> str:
    nodes = list(nodes if nodes is not None else _CATALOG)
    vectors = {n.name: n.assumptions for n in nodes}
    lines = ["digraph settings {", "  rankdir=TB;"]
    for n in nodes:
        style = "dashed" if n.abstract else "solid"
        lines.append(f'  "{n.name}" [style={style}];')
    for p, c in hasse_edges(vectors):
        lines.append(f'  "{p}" -> "{c}";')
    lines.append("}")
    return "\n".join(lines) + "\n"
