"""Multistart minimisation of the boundary-datum functionals.

Each start runs projected gradient descent: central finite-difference
gradients, a Barzilai-Borwein trial step and Armijo backtracking.  Trial
points where the functional is ``+inf`` (boundary contact, coincident
centres, overlapping cores) are rejected by the line search.  Starts come
from an unscrambled Halton sequence over the bounding box of ``Omega^n``,
keeping only admissible configurations.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .dirichlet import (
    finite_eps_energy,
    limit_functional,
    limit_functional_n,
    renormalize,
    separations,
)
from .errors import (
    AllStartsDiverged,
    CoresOverlap,
    GeometryError,
    NoDescentDirection,
    OutsideDomain,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MinimizeOptions:
    starts: int | None = None  # 16 for n = 1, 32 otherwise
    tol: float = 1e-5
    max_iter: int = 200
    fd_step: float = 1e-5  # relative to the diameter
    armijo: float = 1e-4
    seed: int = 0  # Halton offset
    min_start_distance: float = 0.02  # relative to the diameter
    quad: dict = field(default_factory=lambda: {"n_theta": 128, "n_r": 32})
    workers: int = 1

    def n_starts(self, n):
        if self.starts is not None:
            return int(self.starts)
        return 16 if n == 1 else 32


@dataclass
class MinimizationReport:
    argmin: np.ndarray
    value: float
    iterations: int
    seeds: list
    margin: float
    trace: list
    converged: bool
    gradient_norm: float
    endpoint_values: list
    start_values: list
    eps: float | None = None

    def to_dict(self):
        return {
            "argmin": [[float(x), float(y)] for x, y in self.argmin],
            "value": float(self.value),
            "iterations": int(self.iterations),
            "seeds": [int(s) for s in self.seeds],
            "margin": float(self.margin),
            "converged": bool(self.converged),
            "gradient_norm": float(self.gradient_norm),
            "eps": None if self.eps is None else float(self.eps),
            "endpoint_values": [float(v) for v in self.endpoint_values],
            "start_values": [float(v) for v in self.start_values],
            "trace": [float(v) for v in self.trace],
        }


def canonical(points):
    """Sort points lexicographically (x, then y)."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    return p[np.lexsort((p[:, 1], p[:, 0]))]


class Objective:
    """``F`` (``eps=None``) or ``F_eps`` on flattened configurations; ``+inf``
    where undefined."""

    def __init__(self, domain, datum, eps=None, quad=None):
        self.domain = domain
        self.datum = datum
        self.eps = eps
        self.quad = dict(quad or {})
        self.evaluations = 0

    def __call__(self, flat):
        self.evaluations += 1
        c = np.asarray(flat, dtype=float).reshape(-1, 2)
        try:
            if self.eps is None:
                if len(c) == 1:
                    return limit_functional(self.domain, self.datum, c[0], **self.quad)
                return limit_functional_n(self.domain, self.datum, c, **self.quad)
            if not all(self.domain.contains(a) for a in c):
                return math.inf
            e = finite_eps_energy(self.domain, self.datum, c, self.eps, **self.quad)
            return renormalize(e, len(c), self.eps)
        except (OutsideDomain, CoresOverlap):
            return math.inf


def _project(domain, flat, floor):
    pts = np.asarray(flat, dtype=float).reshape(-1, 2).copy()
    for i, p in enumerate(pts):
        inside = domain.contains(p)
        if inside and domain.distance(p) >= floor:
            continue
        proj = domain.nearest_boundary(p, check_inside=False)
        bp = proj.boundary_point
        pts[i] = bp.position - floor * bp.outward_normal
    return pts.ravel()


def fd_gradient(obj, x, h, fx=None):
    """Central differences; one-sided where a stencil point is ``+inf``."""
    g = np.empty_like(x)
    for k in range(len(x)):
        e = np.zeros_like(x)
        e[k] = h
        fp, fm = obj(x + e), obj(x - e)
        if math.isfinite(fp) and math.isfinite(fm):
            g[k] = (fp - fm) / (2 * h)
        else:
            f0 = obj(x) if fx is None else fx
            if math.isfinite(fp):
                g[k] = (fp - f0) / h
            elif math.isfinite(fm):
                g[k] = (f0 - fm) / h
            else:
                g[k] = math.nan
    return g


def descend(obj, x0, opts, domain):
    """Single descent run; returns a dict with endpoint, value, trace and status."""
    diam = domain.diameter
    h = opts.fd_step * diam
    floor = 10 * h
    x = np.asarray(x0, dtype=float).copy()
    fx = obj(x)
    trace = [fx]
    g = fd_gradient(obj, x, h, fx)
    prev = None
    status = "max_iter"
    it = 0
    for it in range(1, opts.max_iter + 1):
        gn = float(np.linalg.norm(g))
        if not np.isfinite(gn):
            status = "stalled"
            break
        if gn < opts.tol:
            status = "converged"
            it -= 1
            break
        if prev is not None and prev[0] @ prev[1] > 0:
            step = float(prev[0] @ prev[0]) / float(prev[0] @ prev[1])
        else:
            step = 0.01 * diam / gn
        step = min(step, 0.1 * diam / gn)
        accepted = False
        while step * gn > 1e-15 * diam:
            xt = _project(domain, x - step * g, floor)
            ft = obj(xt)
            if math.isfinite(ft) and ft <= fx - opts.armijo * float(g @ (x - xt)) and ft <= fx:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            status = "stalled"
            break
        gt = fd_gradient(obj, xt, h, ft)
        prev = (xt - x, gt - g)
        x, fx, g = xt, ft, gt
        trace.append(fx)
    return {
        "x": x,
        "value": fx,
        "gradient_norm": float(np.linalg.norm(g)),
        "iterations": it,
        "trace": trace,
        "status": status,
    }


def starting_points(domain, n, count, seed=0, min_distance=0.02):
    """Admissible starts from an unscrambled Halton sequence; returns (indices, points)."""
    diam = domain.diameter
    if domain.is_disk:
        lo = domain.center - domain.radius
        hi = domain.center + domain.radius
    else:
        lo, hi = domain.samples.min(axis=0), domain.samples.max(axis=0)
    sampler = qmc.Halton(d=2 * n, scramble=False)
    if seed:
        sampler.fast_forward(int(seed))
    index = int(seed)
    found, points = [], []
    while len(found) < count:
        batch = sampler.random(256)
        for u in batch:
            c = lo + u.reshape(n, 2) * (hi - lo)
            index += 1
            if not all(domain.contains(p) for p in c):
                continue
            if np.min(domain.distances(c)) < min_distance * diam:
                continue
            if n > 1 and np.min(2 * separations(domain, c)) < min_distance * diam:
                continue
            found.append(index - 1)
            points.append(c.ravel())
            if len(found) == count:
                break
        if index - seed > 10_000 * count:
            raise AllStartsDiverged("could not place admissible starting points")
    return found, points


def _run_start(args):
    domain, datum, eps, opts, x0 = args
    obj = Objective(domain, datum, eps, opts.quad)
    start_value = obj(x0)
    res = descend(obj, x0, opts, domain)
    res["start_value"] = start_value
    return res


def _workers(opts):
    env = os.environ.get("DISLOCORE_THREADS")
    if env:
        return max(1, int(env))
    return max(1, int(opts.workers))


def _minimize(domain, datum, n, eps, opts):
    opts = opts or MinimizeOptions()
    if not domain.convex:
        raise GeometryError("minimisation of the boundary-datum functionals needs a convex domain")
    seeds, starts = starting_points(domain, n, opts.n_starts(n), opts.seed,
                                    opts.min_start_distance)
    jobs = [(domain, datum, eps, opts, x0) for x0 in starts]
    workers = _workers(opts)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_start, jobs))
    else:
        results = [_run_start(j) for j in jobs]
    finite = [r for r in results if math.isfinite(r["value"])]
    if not finite:
        raise AllStartsDiverged(f"all {len(results)} starts diverged")

    def key(r):
        return (r["value"], tuple(canonical(r["x"]).ravel()))

    best = min(finite, key=key)
    if best["status"] != "converged":
        if best["status"] == "stalled" and best["gradient_norm"] < 100 * opts.tol:
            log.info("best start stalled at gradient norm %.3e", best["gradient_norm"])
        else:
            raise NoDescentDirection(
                f"best start ended with status {best['status']} and gradient norm "
                f"{best['gradient_norm']:.3e}", best["trace"])
    argmin = canonical(best["x"])
    return MinimizationReport(
        argmin=argmin,
        value=float(best["value"]),
        iterations=int(best["iterations"]),
        seeds=list(seeds),
        margin=float(np.min(separations(domain, argmin))),
        trace=list(best["trace"]),
        converged=best["status"] == "converged",
        gradient_norm=best["gradient_norm"],
        endpoint_values=[r["value"] for r in results],
        start_values=[r["start_value"] for r in results],
        eps=eps,
    )


def minimize_limit(domain, datum, n, opts=None):
    """Minimise the limit functional over ``n``-tuples of interior points."""
    return _minimize(domain, datum, int(n), None, opts)


def minimize_finite_eps(domain, datum, n, eps, opts=None):
    """Minimise ``F_eps``; configurations with ``eps >= min d_i`` count as ``+inf``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return _minimize(domain, datum, int(n), float(eps), opts)


@dataclass
class SweepResult:
    limit: MinimizationReport
    rows: list
    uniform: bool
    largest_confined_eps: float | None

    def to_rows(self):
        return self.rows


def _min_pair_distance(points):
    if len(points) < 2:
        return None
    d = points[:, None, :] - points[None, :, :]
    dist = np.hypot(d[..., 0], d[..., 1])
    np.fill_diagonal(dist, np.inf)
    return float(dist.min())


def confinement_sweep(domain, datum, n, eps_list, opts=None, proxy=0.8):
    """Finite-eps minimisers along ``eps_list`` against the limit minimiser.

    ``uniform`` holds when every margin is at least ``proxy`` times the
    margin at the smallest eps.
    """
    eps_list = sorted((float(e) for e in eps_list), reverse=True)
    limit = minimize_limit(domain, datum, n, opts)
    obj = Objective(domain, datum, None, (opts or MinimizeOptions()).quad)
    rows = []
    for eps in eps_list:
        rep = minimize_finite_eps(domain, datum, n, eps, opts)
        rows.append({
            "eps": eps,
            "argmin": rep.argmin,
            "margin": rep.margin,
            "value": rep.value,
            "limit_value": limit.value,
            "value_gap": abs(rep.value - limit.value),
            "argmin_gap": float(np.max(np.hypot(*(rep.argmin - limit.argmin).T))),
            "limit_at_argmin": obj(rep.argmin.ravel()),
            "min_pair_distance": _min_pair_distance(rep.argmin),
            "converged": rep.converged,
        })
    ref = rows[-1]["margin"]
    ok = [r["margin"] > 0 and r["margin"] >= proxy * ref for r in rows]
    # largest eps below which every swept value is confined
    largest = None
    for r, good in zip(reversed(rows), reversed(ok)):
        if not good:
            break
        largest = r["eps"]
    return SweepResult(limit=limit, rows=rows, uniform=all(ok), largest_confined_eps=largest)
