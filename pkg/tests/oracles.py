"""Independent reference implementations used to check the package.

None of these import the code under test beyond plain data (layouts,
vectors), so agreement is evidence rather than tautology.
"""

import itertools

import networkx as nx
import numpy as np

# per-axis rank tables written out by hand
RANK = {
    "context_continuity": {"continuous": 0, "discrete": 1},
    "boundary_signal": {"hidden": 0, "signaled": 1},
    "context_observed": {"hidden": 0, "observed": 1},
    "stationarity": {"nonstationary": 0, "stationary": 1},
}


def leq(a: dict, b: dict) -> bool:
    """``a <= b`` on vectors given as ``to_dict()`` payloads."""
    for axis, table in RANK.items():
        if table[a[axis]] > table[b[axis]]:
            return False
    return a["branch"] == "unspecified" or a["branch"] == b["branch"]


def hasse(vectors: dict) -> set:
    """Covering pairs via networkx's transitive reduction of the strict order."""
    g = nx.DiGraph()
    g.add_nodes_from(vectors)
    for p, c in itertools.permutations(vectors, 2):
        if leq(vectors[p], vectors[c]) and vectors[p] != vectors[c]:
            g.add_edge(p, c)
    return set(nx.transitive_reduction(g).edges())


def grid_optimal_return(layout, horizon=100, step=-0.01, coin=1.0, goal=10.0):
    """Finite-horizon dynamic programming over (t, cell, coin mask).

    V_t(s) = max_a [r(s,a) + V_{t+1}(s')], with V_horizon = 0 and the goal absorbing.
    """
    h, w = layout.shape
    cells = {(r, c) for r in range(h) for c in range(w) if (r, c) not in layout.walls}
    n = len(layout.coins)
    moves = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    V = {(p, m): 0.0 for p in cells for m in range(1 << n)}
    for _ in range(horizon):
        new = {}
        for (p, m) in V:
            best = -np.inf
            for dr, dc in moves:
                q = (p[0] + dr, p[1] + dc)
                if q not in cells:
                    q = p
                r, m2 = step, m
                if q in layout.coins:
                    bit = 1 << layout.coins.index(q)
                    if m2 & bit:
                        r += coin
                        m2 &= ~bit
                if q == layout.goal:
                    val = r + goal
                else:
                    val = r + V[(q, m2)]
                best = max(best, val)
            new[(p, m)] = best
        V = new
    return V[(layout.start, (1 << n) - 1)]


def value_iteration(P, R, gamma, tol=1e-12):
    """Q* for transition tensor P[s, a, s'] and rewards R[s, a]."""
    S, A = R.shape
    Q = np.zeros((S, A))
    while True:
        Qn = R + gamma * P @ Q.max(axis=1)
        if np.max(np.abs(Qn - Q)) < tol:
            return Qn
        Q = Qn


def central_difference(f, params, eps=1e-5):
    """Numerical gradient of scalar ``f()`` with respect to each array in ``params``."""
    out = []
    for p in params:
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = p[i]
            p[i] = old + eps
            fp = f()
            p[i] = old - eps
            fm = f()
            p[i] = old
            g[i] = (fp - fm) / (2 * eps)
        out.append(g)
    return out


def nearest_prototype_accuracy(protos, sigma, n, rng):
    """Monte-Carlo accuracy of the nearest-prototype rule (Bayes-optimal for equal-variance isotropic noise)."""
    k = protos.shape[0]
    y = rng.integers(k, size=n)
    x = protos[y] + sigma * rng.standard_normal((n, protos.shape[1]))
    d = ((x[:, None, :] - protos[None, :, :]) ** 2).sum(axis=2)
    return float((d.argmin(axis=1) == y).mean())


def cartpole_reference(state, action, g=9.8, mc=1.0, mp=0.1, length=0.5, force=10.0, tau=0.02):
    """Textbook cart-pole equations, written independently (semi-implicit Euler)."""
    x, xd, th, thd = state
    f = force if action == 1 else -force
    total = mc + mp
    temp = (f + mp * length * thd ** 2 * np.sin(th)) / total
    thacc = (g * np.sin(th) - np.cos(th) * temp) / (length * (4 / 3 - mp * np.cos(th) ** 2 / total))
    xacc = temp - mp * length * thacc * np.cos(th) / total
    xd = xd + tau * xacc
    x = x + tau * xd
    thd = thd + tau * thacc
    th = th + tau * thd
    return np.array([x, xd, th, thd])
