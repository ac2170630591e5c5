"""Planar cross-sections and the boundary-geometry queries used downstream.

A :class:`Domain` is either a disk (handled analytically) or a smooth closed
curve given by uniformly spaced samples in a periodic parameter
``t in [0, 2*pi)`` and interpolated by a trigonometric polynomial.  All
boundaries are oriented counterclockwise, so the outward normal is the
tangent turned clockwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    DegenerateBoundary,
    EmptyConfiguration,
    GeometryError,
    ParameterOrder,
)

TWO_PI = 2.0 * math.pi


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


@dataclass(frozen=True, eq=False)
class BoundaryPoint:
    position: np.ndarray
    arc_parameter: float
    parameter: float
    outward_normal: np.ndarray
    tangent: np.ndarray
    curvature: float


@dataclass(frozen=True, eq=False)
class Projection:
    """Result of :meth:`Domain.nearest_boundary`.

    ``ambiguous`` is set when several boundary points realise the distance
    (for example the centre of a disk); ``boundary_point`` is then the
    candidate with the smallest parameter.
    """

    distance: float
    boundary_point: BoundaryPoint
    ambiguous: bool = False


class Domain:
    """Bounded, simply connected planar region with a C^2 boundary."""

    def __init__(self, kind, *, center=(0.0, 0.0), radius=1.0, samples=None,
                 convex=None):
        if kind not in ("disk", "curve"):
            raise GeometryError(f"unknown domain kind {kind!r}")
        self.kind = kind
        if kind == "disk":
            if not radius > 0:
                raise GeometryError("disk radius must be positive")
            self.center = np.asarray(center, dtype=float).reshape(2)
            self.radius = float(radius)
            self._convex = True if convex is None else bool(convex)
            return

        pts = np.asarray(samples, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 16:
            raise GeometryError("curve needs an (N, 2) array with N >= 16")
        if np.any(~np.isfinite(pts)):
            raise GeometryError("curve samples must be finite")
        area = 0.5 * np.sum(_cross(pts, np.roll(pts, -1, axis=0)))
        if area < 0:
            # keep sample 0 first, reverse orientation
            pts = np.concatenate([pts[:1], pts[:0:-1]])
        self.samples = pts
        n = len(pts)
        z = pts[:, 0] + 1j * pts[:, 1]
        coef = np.fft.fft(z) / n
        k = np.fft.fftfreq(n, d=1.0 / n)
        if n % 2 == 0:
            coef[n // 2] = 0.0
        self._coef = coef
        self._k = k
        self.center = pts.mean(axis=0)
        self.radius = None
        self._check_simple()
        if convex is None:
            kappa = self.curvature(np.linspace(0, TWO_PI, 4 * n, endpoint=False))
            convex = bool(np.min(kappa) > -1e-9 * np.max(np.abs(kappa)))
        self._convex = bool(convex)

    # -- constructors -------------------------------------------------------

    @classmethod
    def unit_disk(cls):
        return cls("disk")

    @classmethod
    def disk(cls, center=(0.0, 0.0), radius=1.0):
        return cls("disk", center=center, radius=radius)

    @classmethod
    def from_samples(cls, points, convex=None):
        return cls("curve", samples=points, convex=convex)

    @classmethod
    def ellipse(cls, a, b, samples=256, center=(0.0, 0.0), angle=0.0):
        t = np.linspace(0.0, TWO_PI, samples, endpoint=False)
        x = a * np.cos(t)
        y = b * np.sin(t)
        c, s = math.cos(angle), math.sin(angle)
        pts = np.column_stack([c * x - s * y, s * x + c * y]) + np.asarray(center)
        return cls.from_samples(pts)

    # -- basic properties ---------------------------------------------------

    @property
    def convex(self):
        return self._convex

    @property
    def is_disk(self):
        return self.kind == "disk"

    @property
    def n_samples(self):
        return None if self.is_disk else len(self.samples)

    @cached_property
    def diameter(self):
        if self.is_disk:
            return 2.0 * self.radius
        pts = self.boundary(np.linspace(0, TWO_PI, 1024, endpoint=False))
        d = pts[:, None, :] - pts[None, :, :]
        return float(np.sqrt(np.max(np.sum(d * d, axis=-1))))

    @cached_property
    def perimeter(self):
        if self.is_disk:
            return TWO_PI * self.radius
        return float(abs(self._coef_speed_mean()))

    def __repr__(self):
        if self.is_disk:
            return f"Domain.disk(center={tuple(self.center)}, radius={self.radius})"
        return f"Domain.from_samples(<{len(self.samples)} samples>)"

    # -- parametrisation ----------------------------------------------------

    def _series(self, t, order):
        t = np.asarray(t, dtype=float)
        e = np.exp(1j * np.multiply.outer(t, self._k))
        return e @ (self._coef * (1j * self._k) ** order)

    def derivatives(self, t):
        """Return gamma(t), gamma'(t), gamma''(t) as arrays of shape (..., 2)."""
        t = np.asarray(t, dtype=float)
        if self.is_disk:
            c, s = np.cos(t), np.sin(t)
            r = self.radius
            g = self.center + r * np.stack([c, s], axis=-1)
            g1 = r * np.stack([-s, c], axis=-1)
            g2 = -r * np.stack([c, s], axis=-1)
            return g, g1, g2
        out = []
        for order in range(3):
            z = self._series(t, order)
            out.append(np.stack([z.real, z.imag], axis=-1))
        return tuple(out)

    def boundary(self, t):
        if self.is_disk:
            t = np.asarray(t, dtype=float)
            return self.center + self.radius * np.stack([np.cos(t), np.sin(t)], axis=-1)
        z = self._series(t, 0)
        return np.stack([z.real, z.imag], axis=-1)

    def frame(self, t):
        """Unit tangent, outward normal, curvature and speed at parameter t."""
        g, g1, g2 = self.derivatives(t)
        speed = np.hypot(g1[..., 0], g1[..., 1])
        tau = g1 / speed[..., None]
        nu = np.stack([tau[..., 1], -tau[..., 0]], axis=-1)
        kappa = _cross(g1, g2) / speed**3
        return tau, nu, kappa, speed

    def curvature(self, t):
        return self.frame(t)[2]

    def uniform_frame(self, m):
        """``(points, tau, nu, kappa, speed)`` at ``m`` equispaced parameters.

        For curves with ``m >= samples`` the series is summed by zero-padded
        inverse FFT, which is exact and far cheaper than direct evaluation.
        """
        m = int(m)
        cache = self.__dict__.setdefault("_uniform_cache", {})
        if m not in cache:
            t = np.linspace(0.0, TWO_PI, m, endpoint=False)
            if self.is_disk or m < len(self.samples):
                g, g1, g2 = self.derivatives(t)
            else:
                n = len(self.samples)
                out = []
                for order in range(3):
                    c = self._coef * (1j * self._k) ** order
                    pad = np.zeros(m, dtype=complex)
                    pad[: (n + 1) // 2] = c[: (n + 1) // 2]
                    pad[m - n // 2:] = c[n - n // 2:]
                    z = np.fft.ifft(pad) * m
                    out.append(np.stack([z.real, z.imag], axis=-1))
                g, g1, g2 = out
            speed = np.hypot(g1[:, 0], g1[:, 1])
            tau = g1 / speed[:, None]
            nu = np.stack([tau[:, 1], -tau[:, 0]], axis=-1)
            kappa = _cross(g1, g2) / speed**3
            if len(cache) > 32:
                cache.clear()
            cache[m] = (g, tau, nu, kappa, speed)
        return cache[m]

    def _coef_speed_mean(self):
        return self.uniform_frame(4 * len(self.samples))[4].mean() * TWO_PI

    def arc_length(self, t):
        """Arc length from parameter 0 to t (counterclockwise), t in [0, 2*pi]."""
        t = np.asarray(t, dtype=float)
        if self.is_disk:
            return self.radius * t
        m = 4 * len(self.samples)
        speed = self.uniform_frame(m)[4]
        c = np.fft.fft(speed) / m
        k = np.fft.fftfreq(m, d=1.0 / m)
        mean = c[0].real
        # integral of the zero-mean part, evaluated spectrally
        nz = k != 0
        e = np.exp(1j * np.multiply.outer(t, k[nz]))
        integral = ((e - 1.0) @ (c[nz] / (1j * k[nz]))).real
        return mean * t + integral

    def boundary_point(self, t):
        t = float(np.mod(t, TWO_PI))
        tau, nu, kappa, _ = self.frame(t)
        return BoundaryPoint(
            position=self.boundary(t),
            arc_parameter=float(self.arc_length(t)),
            parameter=t,
            outward_normal=nu,
            tangent=tau,
            curvature=float(kappa),
        )

    def _dense(self, factor=4, minimum=512):
        m = max(factor * len(self.samples), minimum)
        t = np.linspace(0, TWO_PI, m, endpoint=False)
        return t, self.boundary(t)

    @cached_property
    def _dense_cache(self):
        return self._dense()

    def _check_simple(self):
        pts = self.samples
        n = len(pts)
        a = pts
        e = np.roll(pts, -1, axis=0) - pts
        i, j = np.triu_indices(n, k=2)
        keep = ~((i == 0) & (j == n - 1))
        i, j = i[keep], j[keep]
        denom = _cross(e[i], e[j])
        ok = np.abs(denom) > 1e-300
        i, j, denom = i[ok], j[ok], denom[ok]
        d = a[j] - a[i]
        s = _cross(d, e[j]) / denom
        u = _cross(d, e[i]) / denom
        # half-open intervals also catch non-adjacent segments meeting at a sample
        if np.any((s >= 0) & (s < 1) & (u >= 0) & (u < 1)):
            raise GeometryError("boundary samples self-intersect")

    # -- queries ------------------------------------------------------------

    def contains(self, point):
        p = np.asarray(point, dtype=float).reshape(2)
        if not np.all(np.isfinite(p)):
            return False
        if self.is_disk:
            return bool(np.sum((p - self.center) ** 2) < self.radius**2)
        proj = self.nearest_boundary(p, check_inside=False)
        offset = p - proj.boundary_point.position
        return bool(proj.distance > 1e-13 and offset @ proj.boundary_point.outward_normal < 0)

    def contains_many(self, points):
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        if self.is_disk:
            return np.sum((pts - self.center) ** 2, axis=1) < self.radius**2
        return np.array([self.contains(p) for p in pts], dtype=bool)

    def distance(self, point):
        """dist(point, boundary), negative for exterior points."""
        p = np.asarray(point, dtype=float).reshape(2)
        if self.is_disk:
            return float(self.radius - np.hypot(*(p - self.center)))
        proj = self.nearest_boundary(p, check_inside=False)
        bp = proj.boundary_point
        outside = (p - bp.position) @ bp.outward_normal > 0
        return -proj.distance if outside else proj.distance

    def distances(self, points):
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        if self.is_disk:
            return self.radius - np.hypot(*(pts - self.center).T)
        return np.array([self.distance(p) for p in pts])

    def nearest_boundary(self, point, check_inside=True):
        p = np.asarray(point, dtype=float).reshape(2)
        if self.is_disk:
            rel = p - self.center
            r = float(np.hypot(*rel))
            if r < 1e-15 * self.radius:
                return Projection(self.radius, self.boundary_point(0.0), ambiguous=True)
            t = math.atan2(rel[1], rel[0]) % TWO_PI
            return Projection(abs(self.radius - r), self.boundary_point(t))

        tt, pts = self._dense_cache
        d2 = np.sum((pts - p) ** 2, axis=1)
        m = len(d2)
        best = float(d2.min())
        minima = np.flatnonzero((d2 <= np.roll(d2, 1)) & (d2 <= np.roll(d2, -1)))
        # only local minima that could compete with the best one
        cand = minima[d2[minima] <= best * (1 + 1e-2) + 1e-300]
        refined = []
        for idx in cand:
            t = self._newton_project(p, tt[idx])
            q = self.boundary(t)
            refined.append((float(np.hypot(*(q - p))), t % TWO_PI))
        refined.sort()
        dist, t_best = refined[0]
        tol = 1e-9 * max(dist, self.diameter * 1e-6)
        ties = [t for d, t in refined if d - dist <= tol]
        distinct = []
        for t in sorted(ties):
            if all(abs(((t - u + math.pi) % TWO_PI) - math.pi) > TWO_PI / m for u in distinct):
                distinct.append(t)
        ambiguous = len(distinct) > 1
        if ambiguous:
            t_best = distinct[0]
        return Projection(dist, self.boundary_point(t_best), ambiguous=ambiguous)

    def _newton_project(self, p, t):
        for _ in range(50):
            g, g1, g2 = self.derivatives(t)
            r = g - p
            f = r @ g1
            df = g1 @ g1 + r @ g2
            if df <= 0:
                df = g1 @ g1
            step = f / df
            t -= step
            if abs(step) < 1e-15:
                break
        return t

    @cached_property
    def _rho_bar(self):
        if self.is_disk:
            return self.radius, 0.0

        def estimate(m):
            t = np.linspace(0, TWO_PI, m, endpoint=False)
            _, nu, kappa, _ = self.frame(t)
            if not np.all(np.isfinite(kappa)):
                raise DegenerateBoundary("curvature is not finite")
            kmax = float(np.max(np.abs(kappa)))
            if kmax * self.diameter > 1e8:
                raise DegenerateBoundary("curvature estimate diverges")
            pts = self.boundary(t)
            best = 1.0 / kmax if kmax > 0 else math.inf
            for start in range(0, m, 256):
                p = pts[start:start + 256]
                n = nu[start:start + 256]
                d = pts[None, :, :] - p[:, None, :]
                num = np.sum(d * d, axis=-1)
                den = 2.0 * np.abs(np.sum(d * n[:, None, :], axis=-1))
                with np.errstate(divide="ignore", invalid="ignore"):
                    r = np.where(den > 0, num / den, np.inf)
                best = min(best, float(np.min(r)))
            return best

        m = min(max(4 * len(self.samples), 512), 2048)
        fine = estimate(m)
        coarse = estimate(m // 2)
        if not fine > 0:
            raise DegenerateBoundary("non-positive uniform disk radius")
        return fine, abs(fine - coarse)

    def uniform_disk_radius(self):
        return self._rho_bar[0]

    @property
    def uniform_disk_radius_resolution(self):
        return self._rho_bar[1]

    def ray_exit(self, origin, directions):
        """Distance along each unit direction from an interior origin to the
        boundary (first crossing)."""
        o = np.asarray(origin, dtype=float).reshape(2)
        u = np.asarray(directions, dtype=float).reshape(-1, 2)
        if self.is_disk:
            rel = o - self.center
            b = u @ rel
            c = rel @ rel - self.radius**2
            return -b + np.sqrt(b * b - c)

        tt, pts = self._dense_cache
        m = len(pts)
        e = np.roll(pts, -1, axis=0) - pts
        d = pts - o
        denom = _cross(u[:, None, :], e[None, :, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            s = _cross(d[None, :, :], e[None, :, :]) / denom
            lam = _cross(d[None, :, :], u[:, None, :]) / denom
        valid = (lam >= 0) & (lam < 1) & (s > 0) & np.isfinite(s)
        s = np.where(valid, s, np.inf)
        k = np.argmin(s, axis=1)
        rows = np.arange(len(u))
        if not np.all(np.isfinite(s[rows, k])):
            raise GeometryError("ray does not exit the domain; origin outside?")
        t = tt[k] + lam[rows, k] * (TWO_PI / m)
        dist = s[rows, k]
        for _ in range(8):
            g, g1, _ = self.derivatives(t)
            f = g - o - dist[:, None] * u
            # J = [g1, -u]; solve J [dt, ds] = -f
            det = -g1[:, 0] * u[:, 1] + u[:, 0] * g1[:, 1]
            dt = (-f[:, 0] * (-u[:, 1]) + u[:, 0] * (-f[:, 1])) / det
            ds = (g1[:, 0] * (-f[:, 1]) - g1[:, 1] * (-f[:, 0])) / det
            t = t + dt
            dist = dist + ds
            if np.max(np.abs(ds)) < 1e-15 * self.diameter:
                break
        return dist


# -- configuration-level geometry ----------------------------------------------


def _as_points(positions):
    pts = np.asarray(positions, dtype=float)
    if pts.size == 0:
        raise EmptyConfiguration("no positions given")
    return pts.reshape(-1, 2)


def pair_distances(points):
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    d = pts[:, None, :] - pts[None, :, :]
    return np.hypot(d[..., 0], d[..., 1])


def separation(positions, domain):
    """Minimal distance among the points and from the points to the boundary."""
    pts = _as_points(positions)
    sep = float(np.min(domain.distances(pts)))
    if len(pts) > 1:
        dist = pair_distances(pts)
        iu = np.triu_indices(len(pts), 1)
        sep = min(sep, float(np.min(dist[iu])))
    return sep


def in_region_D(domain, positions, delta, gamma):
    """First point within ``delta`` of the boundary, the others ``gamma``-separated
    from each other and from the boundary."""
    if delta >= gamma:
        raise ParameterOrder(f"delta={delta} must be smaller than gamma={gamma}")
    pts = _as_points(positions)
    if not all(domain.contains(p) for p in pts):
        return False
    if domain.distance(pts[0]) >= delta:
        return False
    if len(pts) == 1:
        return True
    return separation(pts[1:], domain) > gamma


def in_region_C(domain, positions, zeta, eta):
    """First two points within ``zeta`` of each other, the rest
    ``eta``-separated, and the pair farther than ``eta`` from the rest and the
    boundary."""
    if zeta >= eta:
        raise ParameterOrder(f"zeta={zeta} must be smaller than eta={eta}")
    pts = _as_points(positions)
    if len(pts) < 2:
        raise EmptyConfiguration("the pair region needs at least two points")
    if not all(domain.contains(p) for p in pts):
        return False
    if np.hypot(*(pts[0] - pts[1])) >= zeta:
        return False
    pair, rest = pts[:2], pts[2:]
    if np.min(domain.distances(pair)) <= eta:
        return False
    if len(rest):
        if separation(rest, domain) <= eta:
            return False
        cross = pair[:, None, :] - rest[None, :, :]
        if np.min(np.hypot(cross[..., 0], cross[..., 1])) <= eta:
            return False
    return True
