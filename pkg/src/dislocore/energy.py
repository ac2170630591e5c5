"""Renormalised energy, Peach-Koehler forces and strain fields of screw dislocations.

Normalisation: the strain ``h`` is divergence free with
``curl h = sum_i b_i delta_{z_i}``, so the circulation around ``z_i`` is
``b_i`` and the core energy grows like ``sum_i b_i^2 |log eps| / (4 pi)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import quadrature
from .errors import (
    CoincidentDislocations,
    CoresOverlap,
    EvaluationAtSingularity,
    LoopIntersectsSingularity,
    NotInRegion,
    OutsideDomain,
)
from .geometry import TWO_PI, Domain, separation
from .green import QUADRATURE_UPSAMPLE

INV_2PI = 1.0 / TWO_PI
COINCIDENCE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Configuration:
    """Dislocation positions ``z_i`` (n, 2) with Burgers moduli ``b_i = +-1``."""

    positions: np.ndarray
    moduli: np.ndarray
    domain: Domain

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float).reshape(-1, 2)
        mod = np.array(self.moduli, dtype=int).reshape(-1)
        if len(pos) != len(mod):
            raise ValueError("positions and moduli must have the same length")
        if not np.all(np.abs(mod) == 1):
            raise ValueError("Burgers moduli must be +1 or -1")
        for p in pos:
            if not self.domain.contains(p):
                raise OutsideDomain(f"dislocation at {tuple(p)} is not inside the domain")
        pos.setflags(write=False)
        mod.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "moduli", mod)

    @property
    def n(self):
        return len(self.positions)

    def moved(self, positions):
        return Configuration(positions, self.moduli, self.domain)

    def permuted(self, order):
        order = list(order)
        return Configuration(self.positions[order], self.moduli[order], self.domain)


def _pair_terms(pos):
    d = pos[:, None, :] - pos[None, :, :]
    r2 = np.sum(d * d, axis=-1)
    return d, r2


def energy_of(engine, positions, moduli):
    """Renormalised energy without input validation (used in hot loops)."""
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    b = np.asarray(moduli, dtype=float)
    n = len(pos)
    total = 0.5 * float(np.sum(b * b * engine.robin_many(pos)))
    for i in range(n):
        for j in range(i + 1, n):
            r = math.hypot(*(pos[i] - pos[j]))
            if r < COINCIDENCE_TOL:
                if b[i] == b[j]:
                    return math.inf
                raise CoincidentDislocations(
                    f"opposite-sign dislocations {i} and {j} coincide (annihilation)")
            k = float(engine.regular_part_many(pos[i], pos[j])[0])
            total += b[i] * b[j] * (k - INV_2PI * math.log(r))
    return total


def forces_of(engine, positions, moduli):
    """All Peach-Koehler forces ``-grad_{z_i} E_n`` as an (n, 2) array."""
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    b = np.asarray(moduli, dtype=float)
    n = len(pos)
    grad = np.zeros((n, 2))
    for i in range(n):
        grad[i] += 0.5 * b[i] ** 2 * engine.grad_robin(pos[i])
        if n == 1:
            continue
        others = np.delete(np.arange(n), i)
        for j in others:
            r = pos[i] - pos[j]
            r2 = r @ r
            if r2 < COINCIDENCE_TOL**2:
                raise CoincidentDislocations(f"dislocations {i} and {j} coincide")
            gk = engine.grad_regular_many(pos[i], pos[j])[0]
            grad[i] += b[i] * b[j] * (gk - INV_2PI * r / r2)
    return -grad


def renormalized_energy(config, engine):
    return energy_of(engine, config.positions, config.moduli)


def peach_koehler(config, engine, i):
    return forces_of(engine, config.positions, config.moduli)[i]


def peach_koehler_all(config, engine):
    return forces_of(engine, config.positions, config.moduli)


def near_boundary_decomposition(config, engine, i=0):
    """Split the force on dislocation ``i`` into ``nu(s) / (4 pi d)`` and the rest.

    ``i`` must be the dislocation closest to the boundary, strictly inside
    the uniform disk radius so that its projection ``s`` is unique.
    """
    dom = config.domain
    proj = dom.nearest_boundary(config.positions[i])
    d = proj.distance
    if d >= dom.uniform_disk_radius() or proj.ambiguous:
        raise NotInRegion(f"dislocation {i} is not within the uniform disk radius")
    others = np.delete(config.positions, i, axis=0)
    if len(others):
        if np.min(dom.distances(others)) <= d:
            raise NotInRegion(f"dislocation {i} is not the closest to the boundary")
    leading = proj.boundary_point.outward_normal / (4.0 * math.pi * d)
    force = peach_koehler(config, engine, i)
    return leading, force - leading


class StrainField:
    """``h(x) = sum_i b_i (d_2 G, -d_1 G)(x, z_i)``: divergence free, curl ``sum b_i delta``."""

    def __init__(self, config, engine, max_upsample=None):
        self.config = config
        self.engine = engine
        self.max_upsample = max_upsample

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = x.reshape(-1, 2)
        out = np.zeros_like(x)
        for z, b in zip(self.config.positions, self.config.moduli):
            g = self.engine.grad_green_many(x, z, self.max_upsample)
            out[:, 0] += b * g[:, 1]
            out[:, 1] -= b * g[:, 0]
        return out[0] if single else out


def strain_eval(config, engine, x):
    x = np.asarray(x, dtype=float).reshape(2)
    if np.min(np.hypot(*(config.positions - x).T)) < COINCIDENCE_TOL:
        raise EvaluationAtSingularity(f"strain is singular at {tuple(x)}")
    return StrainField(config, engine)(x)


def circle_nodes(center, radius, nodes):
    th = TWO_PI * np.arange(nodes) / nodes
    u = np.column_stack([np.cos(th), np.sin(th)])
    pts = np.asarray(center, dtype=float) + radius * u
    tangent = np.column_stack([-u[:, 1], u[:, 0]])
    return pts, tangent, radius * TWO_PI / nodes


def circulation(config, engine, center, radius, quadrature_points=512):
    """Trapezoid-rule ``oint h . t ds`` on a counterclockwise circle."""
    c = np.asarray(center, dtype=float).reshape(2)
    gaps = np.abs(np.hypot(*(config.positions - c).T) - radius)
    if np.min(gaps) < 1e-9 * radius:
        raise LoopIntersectsSingularity("loop passes through a dislocation")
    pts, tangent, ds = circle_nodes(c, radius, quadrature_points)
    if config.domain.distance(c) <= radius:
        raise LoopIntersectsSingularity("loop leaves the domain")
    h = StrainField(config, engine)(pts)
    return float(np.sum(h * tangent) * ds)


def core_energy(config, engine, eps, n_theta=256, n_r=64, check=True):
    """``(1/2) int_{Omega_eps} |h|^2`` with eps-cores removed around every dislocation."""
    if eps <= 0 or eps >= 0.5 * separation(config.positions, config.domain):
        raise CoresOverlap(f"core radius {eps} must lie in (0, separation/2)")
    field = StrainField(config, engine, QUADRATURE_UPSAMPLE)

    def density(x):
        h = field(x)
        return 0.5 * np.sum(h * h, axis=1)

    return quadrature.integrate(config.domain, density, config.positions, eps=eps,
                                n_theta=n_theta, n_r=n_r, check=check)


def extract_renormalized(config, engine, eps_list=None, **quad):
    """Least-squares fit ``E_eps = slope |log eps| + intercept``; returns both."""
    if eps_list is None:
        eps_list = np.geomspace(1e-2, 1e-4, 5)
    eps = np.asarray(eps_list, dtype=float)
    if np.any(np.diff(eps) >= 0):
        raise ValueError("eps_list must be strictly decreasing")
    values = np.array([core_energy(config, engine, e, **quad) for e in eps])
    slope, intercept = np.polyfit(np.abs(np.log(eps)), values, 1)
    return float(slope), float(intercept)
