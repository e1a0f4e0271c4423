# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner-loop kernels.

Every function here has a twin in ``_kernels_py`` with identical semantics and
identical floating-point operation order, so both backends produce
bit-identical rollouts.
"""

from libc.math cimport sin, cos


def cartpole_step(double x, double x_dot, double theta, double theta_dot,
                  long action, double gravity, double masscart,
                  double masspole, double length, double force_mag,
                  double tau):
    cdef double force = force_mag if action == 1 else -force_mag
    cdef double costheta = cos(theta)
    cdef double sintheta = sin(theta)
    cdef double total_mass = masspole + masscart
    cdef double polemass_length = masspole * length
    cdef double temp = (force + polemass_length * (theta_dot * theta_dot) * sintheta) / total_mass
    cdef double thetaacc = (gravity * sintheta - costheta * temp) / (
        length * (4.0 / 3.0 - masspole * (costheta * costheta) / total_mass))
    cdef double xacc = temp - polemass_length * thetaacc * costheta / total_mass
    x_dot = x_dot + tau * xacc
    x = x + tau * x_dot
    theta_dot = theta_dot + tau * thetaacc
    theta = theta + tau * theta_dot
    return x, x_dot, theta, theta_dot


cdef inline double _row_max(double[:, ::1] values, Py_ssize_t s) noexcept nogil:
    cdef Py_ssize_t j
    cdef double m = values[s, 0]
    for j in range(1, values.shape[1]):
        if values[s, j] > m:
            m = values[s, j]
    return m


def greedy_action(double[:, ::1] values, Py_ssize_t s):
    cdef Py_ssize_t j, best = 0
    cdef double m = values[s, 0]
    for j in range(1, values.shape[1]):
        if values[s, j] > m:
            m = values[s, j]
            best = j
    return best


def q_update(double[:, ::1] values, long long[:, ::1] counts, Py_ssize_t s,
             Py_ssize_t a, double r, Py_ssize_t s2, bint done, double lr,
             double gamma):
    cdef double cont = 0.0 if done else 1.0
    cdef double target = r + gamma * _row_max(values, s2) * cont
    values[s, a] = values[s, a] + lr * (target - values[s, a])
    counts[s, a] += 1
    return values[s, a]


def q_update_batch(double[:, ::1] values, long long[:, ::1] counts,
                   long long[::1] s, long long[::1] a, double[::1] r,
                   long long[::1] s2, unsigned char[::1] done, double lr,
                   double gamma):
    cdef Py_ssize_t i
    cdef double cont, target
    with nogil:
        for i in range(s.shape[0]):
            cont = 0.0 if done[i] else 1.0
            target = r[i] + gamma * _row_max(values, s2[i]) * cont
            values[s[i], a[i]] = values[s[i], a[i]] + lr * (target - values[s[i], a[i]])
            counts[s[i], a[i]] += 1


def discretize(double[::1] state, double[:, ::1] edges):
    """Mixed-radix bin index; ``edges[d]`` holds the interior edges of dim d."""
    cdef Py_ssize_t d, k, nb = edges.shape[1]
    cdef long long index = 0, b
    for d in range(state.shape[0]):
        b = 0
        for k in range(nb):
            if state[d] >= edges[d, k]:
                b = k + 1
        index = index * (nb + 1) + b
    return index
