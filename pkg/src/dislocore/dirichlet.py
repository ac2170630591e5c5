"""Boundary-datum functionals for dislocations with circulation 2*pi each.

A tangential strain ``f`` with ``int f ds = 2 pi`` is prescribed on the
boundary; for ``n`` dislocations the applied datum is ``n f``.  The
representation field is ``H = sum_i K_{a_i} + grad v`` where
``K_a = theta_hat_a / rho_a`` and ``v`` is harmonic with boundary values
``n g - sum_i theta_{a_i}``.

``g`` jumps by ``2 pi / n`` at the points ``b_i``, and the angular cut of
``theta_{a_i}`` sits at ``b_i``.  Because every jump of ``n g`` is cancelled
by a cut, the boundary data equals ``n P - sum_i Theta_i`` up to a
constant.  Here ``P`` is the continuous primitive of ``f`` and ``Theta_i``
the continuous lift of ``arg(x - a_i)``.  That form is what gets solved.
"""

from __future__ import annotations

import math

import numpy as np

from . import quadrature
from .errors import (
    CoresOverlap,
    DatumError,
    GeometryError,
    JumpMismatch,
    OutsideDomain,
)
from .geometry import TWO_PI
from .green import QUADRATURE_UPSAMPLE, LaplaceDirichletSolver
from .quadrature import polar_grid

CIRCULATION_TOL = 1e-10


class BoundaryDatum:
    """Tangential strain ``f`` on the boundary as a function of arc length.

    ``table`` holds ``(arc, value)`` pairs interpolated periodically and
    linearly; ``None`` means the uniform datum ``2 pi / perimeter``.
    """

    def __init__(self, domain, table=None):
        self.domain = domain
        self.length = domain.perimeter
        if table is None:
            self._knots = None
            self.uniform_value = TWO_PI / self.length
        else:
            arr = np.asarray(table, dtype=float).reshape(-1, 2)
            order = np.argsort(arr[:, 0])
            s, f = arr[order, 0], arr[order, 1]
            if s[0] < 0 or s[-1] >= self.length or np.any(np.diff(s) <= 0):
                raise DatumError("arc parameters must be distinct and lie in [0, perimeter)")
            if s[0] > 0:
                f0 = self._interp(s, f, np.array([0.0]))[0]
                s, f = np.concatenate([[0.0], s]), np.concatenate([[f0], f])
            ks = np.concatenate([s, [self.length]])
            kf = np.concatenate([f, [f[0]]])
            seg = 0.5 * (kf[1:] + kf[:-1]) * np.diff(ks)
            self._knots = (ks, kf, np.concatenate([[0.0], np.cumsum(seg)]))
            self.uniform_value = None
        total = self.total()
        if abs(total - TWO_PI) > CIRCULATION_TOL:
            raise DatumError(f"total circulation {total!r} differs from 2*pi")

    @classmethod
    def uniform(cls, domain):
        return cls(domain)

    @property
    def is_uniform(self):
        return self._knots is None

    def _interp(self, s, f, q):
        ks = np.concatenate([s, [s[0] + self.length]])
        kf = np.concatenate([f, [f[0]]])
        q = np.where(q < s[0], q + self.length, q)
        return np.interp(q, ks, kf)

    def total(self):
        if self._knots is None:
            return self.uniform_value * self.length
        return float(self._knots[2][-1])

    def f(self, s):
        s = np.mod(np.asarray(s, dtype=float), self.length)
        if self._knots is None:
            return np.full_like(s, self.uniform_value)
        ks, kf, _ = self._knots
        return np.interp(s, ks, kf)

    def primitive(self, s):
        """Continuous primitive ``P(s) = int_0^s f`` for ``s`` in ``[0, L]``."""
        s = np.asarray(s, dtype=float)
        if self._knots is None:
            return self.uniform_value * s
        ks, kf, cum = self._knots
        i = np.clip(np.searchsorted(ks, s, side="right") - 1, 0, len(ks) - 2)
        ds = s - ks[i]
        slope = (kf[i + 1] - kf[i]) / (ks[i + 1] - ks[i])
        return cum[i] + kf[i] * ds + 0.5 * slope * ds * ds

    def primitive_with_jumps(self, s, jump_arcs):
        """Primitive ``g`` of ``f`` that drops by ``2 pi / n`` at each jump point.

        Normalised so that ``g`` is right-continuous and vanishes just after
        the first jump point (in arc order).
        """
        s = np.mod(np.asarray(s, dtype=float), self.length)
        jumps = np.sort(np.mod(np.asarray(jump_arcs, dtype=float), self.length))
        n = len(jumps)
        passed = np.sum(s[..., None] >= jumps, axis=-1)
        g = self.primitive(s) - TWO_PI / n * passed
        base = self.primitive(jumps[0]) - TWO_PI / n
        return g - base

    def to_spec(self):
        if self._knots is None:
            return "uniform"
        ks, kf, _ = self._knots
        return [[float(a), float(b)] for a, b in zip(ks[:-1], kf[:-1])]


def singular_field(a, x):
    """``K_a(x) = theta_hat_a(x) / rho_a(x)``, circulation ``2 pi`` around ``a``."""
    x = np.asarray(x, dtype=float).reshape(-1, 2)
    r = x - np.asarray(a, dtype=float).reshape(2)
    r2 = np.sum(r * r, axis=1)
    return np.column_stack([-r[:, 1], r[:, 0]]) / r2[:, None]


class SingularField:
    def __init__(self, center):
        self.center = np.asarray(center, dtype=float).reshape(2)

    def __call__(self, x):
        return singular_field(self.center, x)


def _angular_origins(domain, centers):
    origins = []
    for a in centers:
        proj = domain.nearest_boundary(a)
        origins.append(proj.boundary_point.arc_parameter)
    return np.array(origins)


def _check_convex(domain):
    if not domain.convex:
        raise GeometryError("boundary-datum functionals require a convex domain")


class Corrector:
    """Harmonic ``v`` with boundary values ``n g - sum_i theta_{a_i}``.

    Disks use the Fourier series of the boundary data (``modes`` samples,
    chosen automatically from the centres' distance to the boundary when
    omitted); other convex domains use the double-layer solver.
    """

    def __init__(self, domain, datum, centers, jump_points=None, backend="auto",
                 modes=None, panels=256, solver=None):
        _check_convex(domain)
        self.domain = domain
        self.datum = datum
        self.centers = np.asarray(centers, dtype=float).reshape(-1, 2)
        self.n = len(self.centers)
        for a in self.centers:
            if not domain.contains(a):
                raise OutsideDomain(f"centre {tuple(a)} is not inside the domain")
        self.angular_origins = _angular_origins(domain, self.centers)
        if jump_points is not None:
            jumps = np.sort(np.mod(np.asarray(jump_points, dtype=float), datum.length))
            if len(jumps) != self.n:
                raise JumpMismatch(
                    f"{len(jumps)} jump points for {self.n} centres leave a net jump")
            gap = np.abs(jumps - np.sort(self.angular_origins))
            gap = np.minimum(gap, datum.length - gap)
            if np.max(gap) > 1e-9 * datum.length:
                raise JumpMismatch("jump points do not coincide with the angular cuts")
        self.jump_points = np.sort(self.angular_origins)
        if backend == "auto":
            backend = "fourier" if domain.is_disk else "bie"
        self.backend = backend
        if backend == "fourier":
            if not domain.is_disk:
                raise ValueError("the Fourier backend needs a disk")
            if modes is None:
                rho = float(np.max(np.hypot(*(self.centers - domain.center).T))) / domain.radius
                need = 36.8 / -math.log(rho) if rho > 0 else 0.0
                modes = 128
                while modes < need and modes < 8192:
                    modes *= 2
            self.modes = int(modes)
            t = TWO_PI * np.arange(self.modes) / self.modes
            data = self.boundary_data(t)
            c = np.fft.rfft(data) / self.modes
            coef = c.copy()
            coef[1:] *= 2.0
            if self.modes % 2 == 0:
                coef[-1] *= 0.5
            self._coef = coef
            k = np.arange(len(coef))
            self._dcoef = (coef * k)[1:]
        elif backend == "bie":
            self.solver = solver or LaplaceDirichletSolver(domain, panels)
            self._mu = self.solver.solve(self.boundary_data(self.solver.t))
        else:
            raise ValueError(f"unknown backend {backend!r}")

    def boundary_data(self, t):
        """Boundary values at parameters ``t`` in ``[0, 2 pi)``."""
        t = np.asarray(t, dtype=float)
        pts = self.domain.boundary(t)
        s = self.domain.arc_length(t)
        out = self.n * self.datum.primitive(s)
        start = self.domain.boundary(0.0)
        early = np.mod(t, TWO_PI) < math.pi
        for a in self.centers:
            u0 = start - a
            u = pts - a
            cross = u0[0] * u[..., 1] - u0[1] * u[..., 0]
            dot = u0[0] * u[..., 0] + u0[1] * u[..., 1]
            # a convex domain makes the angle seen from a increase
            # monotonically through [0, 2 pi); roundoff near t = 0 must not
            # wrap it to 2 pi
            rel = np.mod(np.arctan2(cross, dot), TWO_PI)
            rel = np.where(early & (rel > TWO_PI - 1e-10), rel - TWO_PI, rel)
            out = out - (math.atan2(u0[1], u0[0]) + rel)
        return out

    def _zeta(self, x):
        rel = (np.asarray(x, dtype=float).reshape(-1, 2) - self.domain.center) / self.domain.radius
        return rel[:, 0] + 1j * rel[:, 1]

    @staticmethod
    def _horner(coef, z):
        acc = np.full(z.shape, coef[-1], dtype=complex)
        for c in coef[-2::-1]:
            acc = acc * z + c
        return acc

    def value(self, x):
        if self.backend == "fourier":
            return self._horner(self._coef, self._zeta(x)).real
        return self.solver.evaluate(self._mu, x, QUADRATURE_UPSAMPLE)

    def gradient(self, x):
        if self.backend == "fourier":
            if len(self._dcoef) == 0:
                return np.zeros((len(np.asarray(x).reshape(-1, 2)), 2))
            d = self._horner(self._dcoef, self._zeta(x)) / self.domain.radius
            return np.column_stack([d.real, -d.imag])
        return self.solver.gradient(self._mu, x, QUADRATURE_UPSAMPLE)

    def field(self, x):
        """Representation field ``sum_i K_{a_i} + grad v``."""
        out = self.gradient(x)
        for a in self.centers:
            out = out + singular_field(a, x)
        return out


def corrector(domain, datum, centers, **kw):
    return Corrector(domain, datum, centers, **kw)


def field_circulation(corr, center, radius, nodes=512):
    from .energy import circle_nodes

    pts, tangent, ds = circle_nodes(center, radius, nodes)
    return float(np.sum(corr.field(pts) * tangent) * ds)


def _boundary_sentinel(domain, a):
    """``inf`` for points on the boundary, ``None`` inside; raises outside."""
    if domain.contains(a):
        return None
    proj = domain.nearest_boundary(a, check_inside=False)
    if proj.distance <= 1e-12 * domain.diameter:
        return math.inf
    raise OutsideDomain(f"point {tuple(np.ravel(a))} is outside the domain")


def separations(domain, centers):
    """``d_i = min(dist(a_i, boundary), |a_i - a_j| / 2)``."""
    c = np.asarray(centers, dtype=float).reshape(-1, 2)
    d = domain.distances(c)
    if len(c) > 1:
        diff = c[:, None, :] - c[None, :, :]
        pair = 0.5 * np.hypot(diff[..., 0], diff[..., 1])
        np.fill_diagonal(pair, np.inf)
        d = np.minimum(d, pair.min(axis=1))
    return d


DEFAULT_QUAD = {"n_theta": 256, "n_r": 48}


def limit_functional(domain, datum, a, n_theta=256, n_r=48, corr=None, **corr_kw):
    """Limit functional for one dislocation (``+inf`` on the boundary)."""
    _check_convex(domain)
    a = np.asarray(a, dtype=float).reshape(2)
    sentinel = _boundary_sentinel(domain, a)
    if sentinel is not None:
        return sentinel
    corr = corr or Corrector(domain, datum, [a], **corr_kw)
    d = domain.distance(a)
    x, w = polar_grid(domain, a, [d, "boundary"], n_theta, n_r)
    h = corr.field(x)
    outer = 0.5 * np.sum(w * np.sum(h * h, axis=1))
    xb, wb = polar_grid(domain, a, [0.0, d], n_theta, n_r, grading="linear")
    gv = corr.gradient(xb)
    inner = 0.5 * np.sum(wb * np.sum(gv * gv, axis=1))
    return float(math.pi * math.log(d) + outer + inner)


def _coincident(centers):
    c = np.asarray(centers, dtype=float).reshape(-1, 2)
    diff = c[:, None, :] - c[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    np.fill_diagonal(dist, np.inf)
    return bool(np.min(dist) < 1e-12) if len(c) > 1 else False


def limit_functional_n(domain, datum, centers, n_theta=256, n_r=48, corr=None, **corr_kw):
    """Limit functional for ``n`` same-sign dislocations, term by term."""
    _check_convex(domain)
    c = np.asarray(centers, dtype=float).reshape(-1, 2)
    for a in c:
        sentinel = _boundary_sentinel(domain, a)
        if sentinel is not None:
            return sentinel
    if _coincident(c):
        return math.inf
    corr = corr or Corrector(domain, datum, c, **corr_kw)
    d = separations(domain, c)
    total = float(np.sum(math.pi * np.log(d)))
    for i, a in enumerate(c):
        x, w = polar_grid(domain, a, [d[i], "boundary"], n_theta, n_r)
        gv = corr.gradient(x)
        k = singular_field(a, x)
        total += 0.5 * np.sum(w * np.sum(k * k, axis=1))
        total += np.sum(w * np.sum(gv * k, axis=1))
        if i == 0:
            # (1/2) int |grad v|^2 over the whole domain, split at d_1
            total += 0.5 * np.sum(w * np.sum(gv * gv, axis=1))
            xb, wb = polar_grid(domain, a, [0.0, d[0]], n_theta, n_r, grading="linear")
            gb = corr.gradient(xb)
            total += 0.5 * np.sum(wb * np.sum(gb * gb, axis=1))
    for i in range(len(c)):
        for j in range(i + 1, len(c)):
            ai, aj = c[i], c[j]
            total += quadrature.integrate(
                domain,
                lambda x, ai=ai, aj=aj: np.sum(singular_field(ai, x) * singular_field(aj, x), axis=1),
                [ai, aj], n_theta=n_theta, n_r=n_r)
    return float(total)


def cross_interaction(domain, datum, a1, a2, n_theta=256, n_r=48, **corr_kw):
    """``int (K_1 + grad v_1) . (K_2 + grad v_2)`` with single-centre correctors."""
    c1 = Corrector(domain, datum, [a1], **corr_kw)
    c2 = Corrector(domain, datum, [a2], **corr_kw)
    return quadrature.integrate(
        domain, lambda x: np.sum(c1.field(x) * c2.field(x), axis=1), [a1, a2],
        n_theta=n_theta, n_r=n_r)


def decomposed_functional(domain, datum, centers, n_theta=256, n_r=48, **corr_kw):
    """Sum of single-centre functionals plus pairwise cross interactions."""
    c = np.asarray(centers, dtype=float).reshape(-1, 2)
    total = sum(limit_functional(domain, datum, a, n_theta, n_r, **corr_kw) for a in c)
    for i in range(len(c)):
        for j in range(i + 1, len(c)):
            total += cross_interaction(domain, datum, c[i], c[j], n_theta, n_r, **corr_kw)
    return float(total)


def finite_eps_energy(domain, datum, centers, eps, n_theta=256, n_r=48, corr=None,
                      check=False, **corr_kw):
    """``(1/2) int_{Omega_eps} |H|^2`` for the representation field ``H``."""
    _check_convex(domain)
    c = np.asarray(centers, dtype=float).reshape(-1, 2)
    for a in c:
        if not domain.contains(a):
            raise OutsideDomain(f"centre {tuple(a)} is not inside the domain")
    d = separations(domain, c)
    if not 0 < eps < float(np.min(d)):
        raise CoresOverlap(f"core radius {eps} must lie in (0, min d_i = {np.min(d)})")
    corr = corr or Corrector(domain, datum, c, **corr_kw)

    def density(x):
        h = corr.field(x)
        return 0.5 * np.sum(h * h, axis=1)

    if len(c) == 1:
        x, w = polar_grid(domain, c[0], [eps, d[0], "boundary"], n_theta, n_r)
        return float(np.sum(w * density(x)))
    return quadrature.integrate(domain, density, c, eps=eps, n_theta=n_theta, n_r=n_r,
                                check=check)


def renormalize(energy, n, eps):
    return energy - math.pi * n * abs(math.log(eps))


def renormalized_functional(domain, datum, centers, eps, **kw):
    """``F_eps = E_eps - pi n |log eps|``."""
    c = np.asarray(centers, dtype=float).reshape(-1, 2)
    return renormalize(finite_eps_energy(domain, datum, c, eps, **kw), len(c), eps)

