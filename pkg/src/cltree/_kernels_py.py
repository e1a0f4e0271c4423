"""Pure-Python twins of the compiled kernels (same signatures, same op order)."""

from math import cos, sin


def cartpole_step(x, x_dot, theta, theta_dot, action, gravity, masscart,
                  masspole, length, force_mag, tau):
    force = force_mag if action == 1 else -force_mag
    costheta = cos(theta)
    sintheta = sin(theta)
    total_mass = masspole + masscart
    polemass_length = masspole * length
    temp = (force + polemass_length * (theta_dot * theta_dot) * sintheta) / total_mass
    thetaacc = (gravity * sintheta - costheta * temp) / (
        length * (4.0 / 3.0 - masspole * (costheta * costheta) / total_mass))
    xacc = temp - polemass_length * thetaacc * costheta / total_mass
    x_dot = x_dot + tau * xacc
    x = x + tau * x_dot
    theta_dot = theta_dot + tau * thetaacc
    theta = theta + tau * theta_dot
    return x, x_dot, theta, theta_dot


def _row_max(row):
    m = row[0]
    for v in row[1:]:
        if v > m:
            m = v
    return m


def greedy_action(values, s):
    row = values[s].tolist()
    best = 0
    m = row[0]
    for j in range(1, len(row)):
        if row[j] > m:
            m = row[j]
            best = j
    return best


def q_update(values, counts, s, a, r, s2, done, lr, gamma):
    cont = 0.0 if done else 1.0
    target = r + gamma * _row_max(values[s2].tolist()) * cont
    q = float(values[s, a])
    values[s, a] = q + lr * (target - q)
    counts[s, a] += 1
    return float(values[s, a])


def q_update_batch(values, counts, s, a, r, s2, done, lr, gamma):
    for i in range(len(s)):
        q_update(values, counts, int(s[i]), int(a[i]), float(r[i]), int(s2[i]),
                 bool(done[i]), lr, gamma)


def discretize(state, edges):
    nb = edges.shape[1]
    index = 0
    for d in range(len(state)):
        b = 0
        v = state[d]
        row = edges[d]
        for k in range(nb):
            if v >= row[k]:
                b = k + 1
        index = index * (nb + 1) + b
    return index
