"""Gradient-flow dynamics ``dz_i/dt = -grad_{z_i} E_n`` with collision events.

The flow blows up at a collision, so integration stops when a dislocation
comes within ``collision_radius`` of the boundary or of an opposite-sign
partner; the event time is then bisected on the dense output.  Collision
times quoted against analytic bounds are Richardson-extrapolated to a zero
collision radius (the approach is quadratic in the radius).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .energy import Configuration, energy_of, forces_of
from .errors import BoundDegenerate, NotInRegion, OutsideDomain, ParameterOrder
from .geometry import pair_distances, separation
from .integrator import (
    DenseStep,
    InvalidState,
    bisect_root,
    error_norm,
    initial_step,
    next_factor,
    rk_step,
)

log = logging.getLogger(__name__)

BOUNDARY_COLLISION = "boundary_collision"
PAIR_COLLISION = "pair_collision"
HORIZON = "horizon"
STEP_FAILURE = "step_failure"


@dataclass(frozen=True)
class SimulationOptions:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    T_max: float = 1.0
    collision_radius: float | None = None  # default 1e-4 * diam
    min_step: float = 1e-14
    max_steps: int = 200_000
    event_rel_tol: float = 1e-10
    continue_after_collision: bool = False

    def radius_for(self, domain):
        if self.collision_radius is not None:
            return float(self.collision_radius)
        return 1e-4 * domain.diameter


@dataclass(frozen=True, eq=False)
class Event:
    kind: str
    time: float
    indices: tuple = ()
    location: np.ndarray | None = None
    message: str = ""

    def to_dict(self):
        out = {"kind": self.kind, "time": self.time, "indices": list(self.indices)}
        if self.location is not None:
            out["location"] = [float(v) for v in self.location]
        if self.message:
            out["message"] = self.message
        return out


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray
    positions: np.ndarray  # (samples, n, 2); NaN once a dislocation is removed
    moduli: np.ndarray
    domain: object
    terminal_event: Event
    events: list = field(default_factory=list)
    steps: int = 0
    rejections: int = 0
    rhs_evaluations: int = 0

    @property
    def final_positions(self):
        return self.positions[-1]

    def energies(self, engine):
        out = []
        for pos in self.positions:
            alive = ~np.isnan(pos[:, 0])
            out.append(energy_of(engine, pos[alive], self.moduli[alive]) if alive.any() else 0.0)
        return np.array(out)


class _Flow:
    """Right-hand side and event functions for the live dislocations."""

    def __init__(self, engine, moduli, radius):
        self.engine = engine
        self.domain = engine.domain
        self.moduli = np.asarray(moduli)
        self.radius = radius
        self.evaluations = 0
        n = len(self.moduli)
        iu = np.triu_indices(n, 1)
        opposite = self.moduli[iu[0]] != self.moduli[iu[1]]
        self.opp = (iu[0][opposite], iu[1][opposite])
        self.same = (iu[0][~opposite], iu[1][~opposite])

    def rhs(self, t, y):
        self.evaluations += 1
        pos = y.reshape(-1, 2)
        if not np.all(np.isfinite(pos)):
            raise InvalidState("non-finite state")
        if np.any(self.domain.distances(pos) <= 0):
            raise InvalidState("dislocation left the domain")
        if len(pos) > 1:
            d = pair_distances(pos)
            np.fill_diagonal(d, np.inf)
            if np.min(d) <= 1e-12:
                raise InvalidState("dislocations coincide")
        try:
            f = forces_of(self.engine, pos, self.moduli).ravel()
        except OutsideDomain as exc:
            raise InvalidState(str(exc)) from exc
        if not np.all(np.isfinite(f)):
            raise InvalidState("non-finite force")
        return f

    def boundary_gap(self, y):
        d = self.domain.distances(y.reshape(-1, 2))
        return float(np.min(d)) - self.radius, int(np.argmin(d))

    def _pair_gap(self, y, pairs):
        if len(pairs[0]) == 0:
            return math.inf, None
        pos = y.reshape(-1, 2)
        d = np.hypot(*(pos[pairs[0]] - pos[pairs[1]]).T)
        k = int(np.argmin(d))
        return float(d[k]) - self.radius, (int(pairs[0][k]), int(pairs[1][k]))

    def opposite_gap(self, y):
        return self._pair_gap(y, self.opp)

    def same_gap(self, y):
        return self._pair_gap(y, self.same)


def _integrate_segment(flow, t0, y0, t_end, opts, stats):
    """Integrate until the first event; returns (times, states, event, y_event)."""
    rtol, atol = opts.rel_tol, opts.abs_tol
    times, states = [t0], [y0.copy()]
    t, y = t0, y0.copy()
    f = flow.rhs(t, y)
    h = min(initial_step(flow.rhs, t, y, f, rtol, atol), t_end - t)
    while True:
        if stats["steps"] >= opts.max_steps:
            return times, states, Event(STEP_FAILURE, t, message="step budget exhausted"), y
        if h < opts.min_step:
            msg = "step size underflow"
            log.warning("%s at t=%.6e", msg, t)
            return times, states, Event(STEP_FAILURE, t, message=msg), y
        last = t + h >= t_end
        if last:
            h = t_end - t
        try:
            y_new, f_new, err_vec, k = rk_step(flow.rhs, t, y, f, h)
            err = error_norm(err_vec, y, y_new, rtol, atol)
            if not flow.domain.contains_many(y_new.reshape(-1, 2)).all():
                raise InvalidState("step leaves the domain")
        except InvalidState:
            stats["rejections"] += 1
            h *= 0.25
            continue
        if err > 1.0:
            stats["rejections"] += 1
            h *= max(MIN_SHRINK, next_factor(err))
            continue
        stats["steps"] += 1
        dense = DenseStep(t, h, y, k)
        t_new = t_end if last else t + h

        candidates = []
        gb, ib = flow.boundary_gap(y_new)
        if gb <= 0:
            te = bisect_root(lambda s: flow.boundary_gap(dense(s))[0], t, t_new, opts.event_rel_tol)
            ye = dense(te)
            idx = flow.boundary_gap(ye)[1]
            loc = flow.domain.nearest_boundary(ye.reshape(-1, 2)[idx], check_inside=False)
            candidates.append((te, Event(BOUNDARY_COLLISION, te, (idx,),
                                         loc.boundary_point.position), ye))
        go, pair = flow.opposite_gap(y_new)
        if go <= 0:
            te = bisect_root(lambda s: flow.opposite_gap(dense(s))[0], t, t_new, opts.event_rel_tol)
            ye = dense(te)
            pair = flow.opposite_gap(ye)[1]
            pos = ye.reshape(-1, 2)
            candidates.append((te, Event(PAIR_COLLISION, te, pair,
                                         0.5 * (pos[pair[0]] + pos[pair[1]])), ye))
        gs, spair = flow.same_gap(y_new)
        if gs <= 0:
            te = bisect_root(lambda s: flow.same_gap(dense(s))[0], t, t_new, opts.event_rel_tol)
            msg = f"same-sign dislocations {spair} in near contact"
            log.warning(msg)
            candidates.append((te, Event(STEP_FAILURE, te, spair, message=msg), dense(te)))
        if candidates:
            te, event, ye = min(candidates, key=lambda c: c[0])
            if te > times[-1]:
                times.append(te)
                states.append(ye)
            return times, states, event, ye

        t, y, f = t_new, y_new, f_new
        times.append(t)
        states.append(y.copy())
        if last:
            return times, states, Event(HORIZON, t), y
        h *= next_factor(err)


MIN_SHRINK = 0.1


def simulate(initial: Configuration, engine, opts: SimulationOptions | None = None):
    """Integrate the gradient flow from ``initial`` until the first event."""
    opts = opts or SimulationOptions()
    domain = initial.domain
    radius = opts.radius_for(domain)
    if separation(initial.positions, domain) <= 2.0 * radius:
        raise ValueError("initial separation must exceed twice the collision radius")
    n = initial.n
    alive = np.ones(n, dtype=bool)
    full = initial.positions.astype(float).copy()
    times, samples, events = [], [], []
    stats = {"steps": 0, "rejections": 0}
    evaluations = 0
    t = 0.0
    while True:
        idx = np.flatnonzero(alive)
        flow = _Flow(engine, initial.moduli[idx], radius)
        seg_t, seg_y, event, _ = _integrate_segment(
            flow, t, full[idx].ravel(), opts.T_max, opts, stats)
        evaluations += flow.evaluations
        start = 1 if times else 0
        for ts, ys in zip(seg_t[start:], seg_y[start:]):
            snap = np.full((n, 2), np.nan)
            snap[idx] = ys.reshape(-1, 2)
            times.append(ts)
            samples.append(snap)
        # map local event indices back to the original labelling
        event = replace(event, indices=tuple(int(idx[i]) for i in event.indices))
        events.append(event)
        full = samples[-1].copy()
        t = times[-1]
        if not opts.continue_after_collision or event.kind in (HORIZON, STEP_FAILURE):
            break
        alive[list(event.indices)] = False
        if not alive.any() or t >= opts.T_max:
            break
    return Trajectory(
        times=np.array(times),
        positions=np.array(samples),
        moduli=initial.moduli.copy(),
        domain=domain,
        terminal_event=events[-1],
        events=events,
        steps=stats["steps"],
        rejections=stats["rejections"],
        rhs_evaluations=evaluations,
    )


def collision_time(initial, engine, opts=None):
    """First-event time extrapolated to zero collision radius.

    Returns ``(T_extrapolated, first_event, trajectory_at_radius)``.
    """
    opts = opts or SimulationOptions()
    radius = opts.radius_for(initial.domain)
    coarse = simulate(initial, engine, replace(opts, collision_radius=radius))
    fine = simulate(initial, engine, replace(opts, collision_radius=0.5 * radius))
    event = coarse.terminal_event
    if event.kind in (HORIZON, STEP_FAILURE) or fine.terminal_event.kind != event.kind:
        return event.time, event, coarse
    t1, t2 = event.time, fine.terminal_event.time
    return t2 + (t2 - t1) / 3.0, event, coarse


@dataclass(frozen=True)
class BoundReport:
    kind: str
    measured: float
    raw_time: float
    bound: float
    limit: float
    ratio: float
    first_event: str
    first_event_ok: bool
    passed: bool
    parameters: dict
    trajectory: Trajectory | None = field(default=None, repr=False, compare=False)

    def to_dict(self):
        return {
            "kind": self.kind,
            "measured": self.measured,
            "raw_time": self.raw_time,
            "bound": self.bound,
            "limit": self.limit,
            "ratio": self.ratio,
            "first_event": self.first_event,
            "first_event_ok": self.first_event_ok,
            "passed": self.passed,
            "parameters": self.parameters,
        }


def default_collision_radius(domain, gap):
    """``1e-4 diam``, shrunk to stay small against the initial gap."""
    return min(1e-4 * domain.diameter, 1e-2 * gap)


def _default_options(domain, bound, gap):
    return SimulationOptions(T_max=20.0 * bound,
                             collision_radius=default_collision_radius(domain, gap))


def _spectator_arrays(spectators):
    if spectators is None:
        return np.zeros((0, 2)), np.zeros(0, dtype=int)
    if isinstance(spectators, Configuration):
        return spectators.positions, spectators.moduli
    pos, mod = spectators
    return np.asarray(pos, dtype=float).reshape(-1, 2), np.asarray(mod, dtype=int)


def verify_boundary_bound(domain, engine, delta0, gamma0, spectators=None,
                          opts=None, K=1.0, boundary_parameter=0.0, modulus=1):
    """Place dislocation 1 at distance ``delta0`` inside the boundary point with
    parameter ``boundary_parameter`` and check ``T <= 2 pi delta0^2 (1 + K delta0)``."""
    if delta0 >= gamma0:
        raise ParameterOrder("delta0 must be smaller than gamma0")
    s = domain.boundary_point(boundary_parameter)
    z1 = s.position - delta0 * s.outward_normal
    spos, smod = _spectator_arrays(spectators)
    if len(spos) and separation(spos, domain) <= gamma0:
        raise NotInRegion("spectators are not gamma0-separated")
    config = Configuration(np.vstack([z1, spos]), np.concatenate([[modulus], smod]), domain)
    bound = 2.0 * math.pi * delta0**2
    opts = opts or _default_options(domain, bound, delta0)
    measured, event, traj = collision_time(config, engine, opts)
    ok = event.kind == BOUNDARY_COLLISION and event.indices == (0,)
    limit = bound * (1.0 + K * delta0)
    return BoundReport(
        kind="boundary",
        measured=float(measured),
        raw_time=float(event.time),
        bound=bound,
        limit=limit,
        ratio=float(measured / bound),
        first_event=event.kind,
        first_event_ok=ok,
        passed=bool(ok and measured <= limit),
        parameters={"delta0": delta0, "gamma0": gamma0, "n": config.n, "K": K},
        trajectory=traj,
    )


def pair_bound(zeta0, eta0, n):
    denom = eta0**2 - zeta0**2 - 2.0 * (n - 2) * zeta0 * eta0
    if denom <= 0:
        raise BoundDegenerate(f"eta0^2 - zeta0^2 - 2(n-2) zeta0 eta0 = {denom} <= 0")
    return math.pi * zeta0**2 * eta0**2 / (2.0 * denom)


def verify_pair_bound(domain, engine, zeta0, eta0, spectators=None, opts=None,
                      center=None, direction=(1.0, 0.0)):
    """``+1`` / ``-1`` pair at separation ``zeta0`` around ``center``; checks
    the collision-time bound and that the pair collides first."""
    if zeta0 >= eta0:
        raise ParameterOrder("zeta0 must be smaller than eta0")
    spos, smod = _spectator_arrays(spectators)
    n = 2 + len(spos)
    bound = pair_bound(zeta0, eta0, n)
    c = domain.center if center is None else np.asarray(center, dtype=float)
    u = np.asarray(direction, dtype=float)
    u = u / np.hypot(*u)
    pair = np.array([c + 0.5 * zeta0 * u, c - 0.5 * zeta0 * u])
    if np.min(domain.distances(pair)) <= eta0:
        raise NotInRegion("pair is within eta0 of the boundary")
    if len(spos):
        if separation(spos, domain) <= eta0:
            raise NotInRegion("spectators are not eta0-separated")
        cross = pair[:, None, :] - spos[None, :, :]
        if np.min(np.hypot(cross[..., 0], cross[..., 1])) <= eta0:
            raise NotInRegion("a spectator is within eta0 of the pair")
    config = Configuration(np.vstack([pair, spos]), np.concatenate([[1, -1], smod]), domain)
    opts = opts or _default_options(domain, bound, zeta0)
    measured, event, traj = collision_time(config, engine, opts)
    ok = event.kind == PAIR_COLLISION and set(event.indices) == {0, 1}
    return BoundReport(
        kind="pair",
        measured=float(measured),
        raw_time=float(event.time),
        bound=bound,
        limit=bound,
        ratio=float(measured / bound),
        first_event=event.kind,
        first_event_ok=ok,
        passed=bool(ok and measured <= bound),
        parameters={"zeta0": zeta0, "eta0": eta0, "n": n},
        trajectory=traj,
    )
