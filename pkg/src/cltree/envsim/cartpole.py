"""Cart-pole with context-scaled physical constants."""

from __future__ import annotations

import math

import numpy as np

from .. import kernels
from .schedule import ContextVector

GRAVITY = 9.8
MASSCART = 1.0
MASSPOLE = 0.1
LENGTH = 0.5  # half the pole length
FORCE_MAG = 10.0
TAU = 0.02
THETA_THRESHOLD = 12 * 2 * math.pi / 360
X_THRESHOLD = 2.4
MAX_EPISODE_LEN = 200

MULTIPLIER_RANGE = (0.5, 2.0)
CONTEXT_FIELDS = ("gravity", "cart_mass", "pole_mass", "pole_length")
IDENTITY = np.ones(4)


def sample_task_cartpole(rng: np.random.Generator) -> ContextVector:
    """Log-uniform multipliers for (gravity, cart mass, pole mass, pole length)."""
    lo, hi = np.log(MULTIPLIER_RANGE[0]), np.log(MULTIPLIER_RANGE[1])
    return ContextVector(np.exp(rng.uniform(lo, hi, size=4)))


def constants(context) -> tuple[float, float, float, float]:
    m = context.values if isinstance(context, ContextVector) else np.asarray(context, float)
    return (GRAVITY * float(m[0]), MASSCART * float(m[1]),
            MASSPOLE * float(m[2]), LENGTH * float(m[3]))


def step_cartpole(state, action: int, context, t: int = 0,
                  max_episode_len: int = MAX_EPISODE_LEN):
    """Advance one tick; ``t`` is the number of steps already taken this episode.

    Returns ``(next_state, reward, done)``. ``done`` covers falling over,
    leaving the track, and reaching the episode cap.
    """
    if action not in (0, 1):
        raise ValueError(f"cart-pole action must be 0 or 1, got {action!r}")
    g, mc, mp, length = constants(context)
    x, x_dot, theta, theta_dot = (float(v) for v in state)
    nxt = kernels.cartpole_step(x, x_dot, theta, theta_dot, int(action), g, mc, mp, length,
                                FORCE_MAG, TAU)
    if not all(math.isfinite(v) for v in nxt):
        raise FloatingPointError("cart-pole integration produced a non-finite state")
    done = failed(nxt) or t + 1 >= max_episode_len
    return np.array(nxt), 1.0, bool(done)


def failed(state) -> bool:
    """Pole past the angle limit or cart off the track."""
    x, _, theta, _ = state
    return bool(x < -X_THRESHOLD or x > X_THRESHOLD or theta < -THETA_THRESHOLD
                or theta > THETA_THRESHOLD)


def initial_state(rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(-0.05, 0.05, size=4)


# Nominal state box: termination limits for x and theta, typical speeds otherwise.
STATE_BOUNDS = np.array([X_THRESHOLD, 3.0, THETA_THRESHOLD, 2.0])


def default_bin_edges(bins: int = 6) -> np.ndarray:
    """Interior edges at the quantiles of a uniform law on the nominal state box.

    Quantiles of a uniform law are evenly spaced, so the edges split each
    dimension of ``[-STATE_BOUNDS, STATE_BOUNDS]`` into ``bins`` equal parts.
    """
    if bins < 2:
        raise ValueError("need at least two bins per dimension")
    q = np.arange(1, bins) / bins
    return np.ascontiguousarray(-STATE_BOUNDS[:, None] + 2 * STATE_BOUNDS[:, None] * q[None, :])
