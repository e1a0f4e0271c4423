"""Multi-layout gridworld: the context picks one of several ASCII layouts.

Layout characters: ``#`` wall, ``.`` floor, ``C`` coin, ``G`` goal, ``S`` start.
The agent observes its own position and the remaining coins; walls and the
goal belong to the (hidden) context.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

UP, DOWN, LEFT, RIGHT = range(4)
MOVES = {UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1)}

STEP_PENALTY = -0.01
COIN_REWARD = 1.0
GOAL_REWARD = 10.0
MAX_EPISODE_LEN = 100


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class Layout:
    name: str
    walls: frozenset
    coins: tuple  # ordered coin cells; bit i of a coin mask <-> coins[i]
    goal: tuple
    start: tuple
    shape: tuple

    @classmethod
    def parse(cls, text: str, name: str = "layout") -> "Layout":
        rows = [r.rstrip("\n") for r in text.strip("\n").splitlines() if r.strip()]
        if not rows or len({len(r) for r in rows}) != 1:
            raise LayoutError(f"{name}: layout rows must be non-empty and equal length")
        walls, coins, goal, start = set(), [], None, None
        for i, row in enumerate(rows):
            for j, ch in enumerate(row):
                if ch == "#":
                    walls.add((i, j))
                elif ch == "C":
                    coins.append((i, j))
                elif ch == "G":
                    if goal is not None:
                        raise LayoutError(f"{name}: more than one goal")
                    goal = (i, j)
                elif ch == "S":
                    if start is not None:
                        raise LayoutError(f"{name}: more than one start")
                    start = (i, j)
                elif ch != ".":
                    raise LayoutError(f"{name}: unknown layout character {ch!r}")
        if goal is None or start is None:
            raise LayoutError(f"{name}: layout needs exactly one 'G' and one 'S'")
        return cls(name, frozenset(walls), tuple(coins), goal, start, (len(rows), len(rows[0])))


@dataclass(frozen=True)
class GridState:
    pos: tuple
    coins: int  # bitmask of coins still present
    t: int = 0


def load_layouts(directory: str | Path | None = None) -> list[Layout]:
    """Load ``*.txt`` layouts in name order (the built-in set when ``directory`` is None)."""
    if directory is None:
        files = sorted((p for p in resources.files("cltree.envsim").joinpath("layouts").iterdir()
                        if p.name.endswith(".txt")), key=lambda p: p.name)
    else:
        files = sorted(Path(directory).glob("*.txt"))
    if not files:
        raise LayoutError(f"no layout files found in {directory}")
    layouts = [Layout.parse(f.read_text(), Path(f.name).stem) for f in files]
    if len({lay.shape for lay in layouts}) != 1:
        raise LayoutError("all layouts in a set must share one grid shape")
    return layouts


_DEFAULT: list[Layout] | None = None


def default_layouts() -> list[Layout]:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_layouts()
    return _DEFAULT


def select_layout(context, layouts) -> Layout:
    idx = context.values[0] if hasattr(context, "values") else context
    if float(idx) != int(idx) or not 0 <= int(idx) < len(layouts):
        raise LayoutError(f"invalid layout index {idx!r} for {len(layouts)} layouts")
    return layouts[int(idx)]


def reset_state(layout: Layout) -> GridState:
    return GridState(layout.start, (1 << len(layout.coins)) - 1, 0)


def step_gridworld(state: GridState, action: int, layout: Layout,
                   max_episode_len: int = MAX_EPISODE_LEN):
    """Deterministic move; returns ``(next_state, reward, done)``."""
    if action not in MOVES:
        raise ValueError(f"gridworld action must be in 0..3, got {action!r}")
    dr, dc = MOVES[action]
    r, c = state.pos[0] + dr, state.pos[1] + dc
    h, w = layout.shape
    pos = state.pos if (not (0 <= r < h and 0 <= c < w) or (r, c) in layout.walls) else (r, c)
    reward = STEP_PENALTY
    coins = state.coins
    if pos in layout.coins:
        bit = 1 << layout.coins.index(pos)
        if coins & bit:
            coins &= ~bit
            reward += COIN_REWARD
    done = False
    if pos == layout.goal:
        reward += GOAL_REWARD
        done = True
    t = state.t + 1
    if t >= max_episode_len:
        done = True
    return GridState(pos, coins, t), reward, done


def encode(state: GridState, layout: Layout) -> np.ndarray:
    """Flattened one-hot grid: an agent plane followed by a coin plane."""
    h, w = layout.shape
    obs = np.zeros(2 * h * w)
    obs[state.pos[0] * w + state.pos[1]] = 1.0
    for i, (r, c) in enumerate(layout.coins):
        if state.coins >> i & 1:
            obs[h * w + r * w + c] = 1.0
    return obs


def optimal_return(layout: Layout, horizon: int = MAX_EPISODE_LEN) -> float:
    """Best undiscounted episode return, by breadth-first search over (cell, coins).

    BFS gives the fewest steps to reach each (cell, coin mask); the return of
    an episode ending at the goal at step t with ``k`` coins collected is
    ``k*COIN + GOAL + t*STEP``, and timing out collects ``k*COIN + horizon*STEP``.
    """
    n = len(layout.coins)
    full = (1 << n) - 1
    start = GridState(layout.start, full, 0)
    dist = {(start.pos, start.coins): 0}
    best = float("-inf")
    queue = deque([start])
    while queue:
        s = queue.popleft()
        collected = n - bin(s.coins).count("1")
        if s.t == horizon:
            best = max(best, collected * COIN_REWARD + horizon * STEP_PENALTY)
            continue
        for a in MOVES:
            nxt, _, done = step_gridworld(s, a, layout, max_episode_len=horizon)
            got = n - bin(nxt.coins).count("1")
            if nxt.pos == layout.goal:
                best = max(best, got * COIN_REWARD + GOAL_REWARD + nxt.t * STEP_PENALTY)
                continue
            if done:
                best = max(best, got * COIN_REWARD + nxt.t * STEP_PENALTY)
                continue
            key = (nxt.pos, nxt.coins)
            if key not in dist:
                dist[key] = nxt.t
                queue.append(nxt)
    # a state first reached at t can idle until the horizon
    for (pos, coins), t in dist.items():
        got = n - bin(coins).count("1")
        best = max(best, got * COIN_REWARD + horizon * STEP_PENALTY)
    return best
