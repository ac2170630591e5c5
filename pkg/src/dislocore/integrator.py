"""Dormand-Prince 5(4) embedded Runge-Kutta pair with a 4th-order dense output."""

from __future__ import annotations

import math

import numpy as np

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# difference between the 5th- and 4th-order weights
E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# Shampine's continuous extension: y(t0 + s h) = y0 + h K^T P [s, s^2, s^3, s^4]
P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


class InvalidState(Exception):
    """Raised by a right-hand side evaluated outside its domain of definition."""


class DenseStep:
    def __init__(self, t0, h, y0, k):
        self.t0 = t0
        self.h = h
        self.y0 = y0
        self._q = k.T @ P

    def __call__(self, t):
        s = (t - self.t0) / self.h
        return self.y0 + self.h * (self._q @ np.array([s, s * s, s**3, s**4]))


def rk_step(rhs, t, y, f0, h):
    """One Dormand-Prince step; returns (y_new, f_new, error_vector, stages)."""
    k = np.empty((7, len(y)))
    k[0] = f0
    for s in range(1, 7):
        dy = h * (np.asarray(A[s]) @ k[:s])
        k[s] = rhs(t + C[s] * h, y + dy)
    y_new = y + h * (B @ k)
    return y_new, k[6], h * (E @ k), k


def error_norm(err, y0, y1, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def initial_step(rhs, t0, y0, f0, rtol, atol):
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    try:
        f1 = rhs(t0 + h0, y0 + h0 * f0)
    except InvalidState:
        return h0 * 1e-3
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


def next_factor(err):
    if err == 0.0:
        return MAX_FACTOR
    return min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * err ** -0.2))


def bisect_root(func, ta, tb, rel_tol=1e-10):
    """Locate a sign change of ``func`` (positive at ta, non-positive at tb).

    Returns the right end of the final bracket, where ``func <= 0``.
    """
    fa = func(ta)
    if fa <= 0:
        return ta
    while tb - ta > rel_tol * max(abs(tb), math.ulp(1.0)):
        tm = 0.5 * (ta + tb)
        if tm <= ta or tm >= tb:
            break
        if func(tm) > 0:
            ta = tm
        else:
            tb = tm
    return tb
