"""Polar quadrature on convex domains with point singularities.

Integrals are taken in polar coordinates about a centre: trapezoid rule in
the angle (spectrally accurate for periodic integrands) and Gauss-Legendre
in the radius, either linear or geometrically graded (``r = a (b/a)^u``),
which turns ``1/r`` and ``1/r^2`` behaviour at a core into smooth
integrands.  Several singular centres are split with the smooth Shepard
partition of unity ``W_i = r_i^{-p} / sum_k r_k^{-p}`` so that each piece is
singular at one centre only.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import QuadratureNotConverged
from .geometry import TWO_PI


@lru_cache(maxsize=64)
def gauss01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _directions(n_theta, phase=0.0):
    th = phase + TWO_PI * np.arange(n_theta) / n_theta
    return np.column_stack([np.cos(th), np.sin(th)])


def polar_grid(domain, center, breaks, n_theta=256, n_r=64, grading="log"):
    """Quadrature nodes and area weights for ``{r0 < |x - c| < r1}`` pieces.

    ``breaks`` is a sequence of radii; the string ``"boundary"`` as its last
    entry stands for the ray exit distance.  Consecutive pairs define radial
    pieces; a piece starting at 0 is always linear.
    """
    c = np.asarray(center, dtype=float).reshape(2)
    u = _directions(n_theta)
    dth = TWO_PI / n_theta
    if isinstance(breaks[-1], str):
        outer = domain.ray_exit(c, u)
        radii = [np.full(n_theta, float(b)) for b in breaks[:-1]] + [outer]
    else:
        radii = [np.full(n_theta, float(b)) for b in breaks]
    gx, gw = gauss01(n_r)
    pts, wts = [], []
    for a, b in zip(radii[:-1], radii[1:]):
        if np.any(b < a * (1 - 1e-9)):
            raise ValueError("radial breaks must increase along every ray")
        b = np.maximum(a, b)
        if grading == "log" and np.all(a > 0):
            ratio = np.log(b / a)
            r = a[:, None] * np.exp(np.outer(ratio, gx))
            w = gw[None, :] * r * ratio[:, None] * r * dth
        else:
            r = a[:, None] + np.outer(b - a, gx)
            w = gw[None, :] * (b - a)[:, None] * r * dth
        pts.append(c + r[..., None] * u[:, None, :])
        wts.append(w)
    return np.concatenate([p.reshape(-1, 2) for p in pts]), np.concatenate(
        [w.ravel() for w in wts])


def shepard_weights(points, centers, power=4):
    """Partition of unity ``W_i``; ``W_i`` -> 1 at centre i, vanishes like
    ``r_j^power`` at the other centres."""
    x = np.asarray(points, dtype=float).reshape(-1, 2)
    c = np.asarray(centers, dtype=float).reshape(-1, 2)
    if len(c) == 1:
        return np.ones((1, len(x)))
    r2 = np.sum((x[None, :, :] - c[:, None, :]) ** 2, axis=-1)
    rp = r2 ** (power / 2)
    # W_i = prod_{j != i} r_j^p / sum_k prod_{l != k} r_l^p
    prods = np.empty_like(rp)
    for i in range(len(c)):
        prods[i] = np.prod(np.delete(rp, i, axis=0), axis=0)
    return prods / np.sum(prods, axis=0)


def _partitioned(domain, func, centers, eps, n_theta, n_r, small):
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    total = 0.0
    for i, c in enumerate(centers):
        if eps > 0:
            breaks = [eps, "boundary"]
        else:
            breaks = [0.0, small[i], "boundary"]
        x, w = polar_grid(domain, c, breaks, n_theta, n_r)
        wi = shepard_weights(x, centers)[i]
        total += np.sum(w * wi * func(x))
        if eps > 0:
            for j, cj in enumerate(centers):
                if j == i:
                    continue
                xb, wb = polar_grid(domain, cj, [0.0, eps], n_theta, n_r, grading="linear")
                total -= np.sum(wb * shepard_weights(xb, centers)[i] * func(xb))
    return float(total)


def integrate(domain, func, centers, eps=0.0, n_theta=256, n_r=64, check=False,
              rtol=1e-4, scale=None):
    """``int_{domain minus eps-balls} func`` for integrands singular at ``centers``.

    ``func`` maps an (P, 2) array to (P,) values.  With ``eps = 0`` the
    singularities must be integrable (at most ``1/r``).  With ``check`` the
    rule is also run at half resolution and the two levels must agree to
    ``rtol`` relative to ``scale`` (default: the result itself).
    """
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    small = []
    for i, c in enumerate(centers):
        s = domain.distance(c)
        others = np.delete(centers, i, axis=0)
        if len(others):
            s = min(s, 0.5 * float(np.min(np.hypot(*(others - c).T))))
        small.append(0.5 * s)
    fine = _partitioned(domain, func, centers, eps, n_theta, n_r, small)
    if check:
        coarse = _partitioned(domain, func, centers, eps, n_theta // 2, n_r // 2, small)
        ref = abs(fine) if scale is None else abs(scale)
        if abs(fine - coarse) > rtol * max(ref, 1e-300):
            raise QuadratureNotConverged(
                f"refinement levels disagree: {coarse!r} vs {fine!r}")
    return fine
