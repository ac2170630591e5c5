import math
from dataclasses import replace

import numpy as np
import pytest

import oracles
from dislocore import Configuration, Domain, GreenEngine, SimulationOptions, simulate
from dislocore.dynamics import (
    BOUNDARY_COLLISION,
    HORIZON,
    PAIR_COLLISION,
    STEP_FAILURE,
    collision_time,
    pair_bound,
    verify_boundary_bound,
    verify_pair_bound,
)
from dislocore.errors import BoundDegenerate, NotInRegion, ParameterOrder


@pytest.fixture(scope="module")
def big_disk():
    dom = Domain.disk(radius=50.0)
    return dom, GreenEngine(dom, "image")


def test_radial_oracle():
    assert oracles.radial_collision_time(0.95) == pytest.approx(0.0159799899, abs=1e-9)
    # the closed form agrees with direct quadrature of dt = 2 pi (1 - r^2) / r dr
    r = np.linspace(0.95, 1.0, 200001)
    g = 2 * np.pi * (1 - r**2) / r
    assert np.sum(0.5 * (g[1:] + g[:-1]) * np.diff(r)) == pytest.approx(0.0159799899, abs=1e-9)


def test_single_boundary_collision(disk, image):
    cfg = Configuration([(0.95, 0.0)], [1], disk)
    traj = simulate(cfg, image, SimulationOptions(T_max=0.1))
    ev = traj.terminal_event
    assert ev.kind == BOUNDARY_COLLISION and ev.indices == (0,)
    np.testing.assert_allclose(ev.location, [1.0, 0.0], atol=1e-3)
    assert ev.time == pytest.approx(0.015980, abs=1e-5)
    # raw time matches the oracle stopped at the collision radius
    r_stop = 1 - SimulationOptions().radius_for(disk)
    assert ev.time == pytest.approx(oracles.radial_time_to(0.95, r_stop), rel=1e-7)
    t_ext, _, _ = collision_time(cfg, image, SimulationOptions(T_max=0.1))
    assert t_ext == pytest.approx(oracles.radial_collision_time(0.95), rel=1e-6)


def test_trajectory_invariants(disk, image):
    cfg = Configuration([(0.6, 0.2), (-0.3, 0.4), (0.1, -0.5)], [1, 1, -1], disk)
    opts = SimulationOptions(T_max=0.2)
    traj = simulate(cfg, image, opts)
    assert np.all(np.diff(traj.times) > 0)
    e = traj.energies(image)
    assert np.all(np.diff(e) <= 10 * opts.abs_tol)
    assert traj.steps > 0 and traj.rhs_evaluations > traj.steps


def test_origin_is_stationary(disk, image):
    traj = simulate(Configuration([(0.0, 0.0)], [1], disk), image, SimulationOptions(T_max=1.0))
    assert traj.terminal_event.kind == HORIZON
    assert traj.terminal_event.time == 1.0
    assert np.linalg.norm(traj.final_positions[0]) < 1e-9


def test_free_dipole(big_disk):
    dom, eng = big_disk
    cfg = Configuration([(0.05, 0.0), (-0.05, 0.0)], [1, -1], dom)
    t, ev, _ = collision_time(cfg, eng, SimulationOptions(T_max=0.1, collision_radius=1e-4))
    assert ev.kind == PAIR_COLLISION and set(ev.indices) == {0, 1}
    np.testing.assert_allclose(ev.location, [0.0, 0.0], atol=1e-3)
    assert t == pytest.approx(oracles.dipole_collision_time(0.1), rel=0.02)
    assert t == pytest.approx(0.01571, rel=0.02)


def test_mirror_symmetry(disk, image):
    a = Configuration([(0.4, 0.3), (-0.2, -0.35)], [1, -1], disk)
    b = Configuration([(0.4, -0.3), (-0.2, 0.35)], [1, -1], disk)
    opts = SimulationOptions(T_max=0.05)
    ta, tb = simulate(a, image, opts), simulate(b, image, opts)
    assert ta.terminal_event.kind == tb.terminal_event.kind
    assert ta.terminal_event.time == pytest.approx(tb.terminal_event.time, abs=1e-8)
    mirrored = tb.final_positions * [1, -1]
    np.testing.assert_allclose(ta.final_positions, mirrored, atol=1e-8)


def test_rel_tol_halving(disk, image):
    cfg = Configuration([(0.3, 0.5), (0.2, -0.6)], [1, -1], disk)
    coarse = simulate(cfg, image, SimulationOptions(T_max=1.0, rel_tol=1e-7))
    fine = simulate(cfg, image, SimulationOptions(T_max=1.0, rel_tol=5e-8))
    tc, tf = coarse.terminal_event.time, fine.terminal_event.time
    assert abs(tc - tf) < 5 * 5e-8 * tf


def test_collision_radius_quadratic(disk, image):
    cfg = Configuration([(0.9, 0.0)], [1], disk)
    exact = oracles.radial_collision_time(0.9)
    errs = []
    for rad in (4e-3, 2e-3, 1e-3):
        ev = simulate(cfg, image, SimulationOptions(T_max=1.0, collision_radius=rad)).terminal_event
        errs.append(exact - ev.time)
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)


def test_same_sign_never_pair_collides(big_disk):
    dom, eng = big_disk
    cfg = Configuration([(0.01, 0.0), (-0.01, 0.0)], [1, 1], dom)
    traj = simulate(cfg, eng, SimulationOptions(T_max=1e-3, collision_radius=1e-4))
    assert traj.terminal_event.kind in (HORIZON, STEP_FAILURE)
    d = np.hypot(*(traj.final_positions[0] - traj.final_positions[1]))
    assert d > 0.02


def test_initial_separation_precondition(disk, image):
    cfg = Configuration([(0.0, 0.0), (1e-4, 0.0)], [1, -1], disk)
    with pytest.raises(ValueError):
        simulate(cfg, image, SimulationOptions(collision_radius=1e-4))


def test_continue_after_collision(disk, image):
    cfg = Configuration([(0.95, 0.0), (-0.2, 0.1)], [1, 1], disk)
    traj = simulate(cfg, image, SimulationOptions(T_max=0.05, continue_after_collision=True))
    assert traj.events[0].kind == BOUNDARY_COLLISION and traj.events[0].indices == (0,)
    assert np.isnan(traj.final_positions[0]).all()
    assert np.isfinite(traj.final_positions[1]).all()


def test_verify_boundary_example(disk, image):
    rep = verify_boundary_bound(disk, image, 0.05, 0.5)
    assert rep.first_event_ok and rep.passed
    assert rep.measured == pytest.approx(0.015980, abs=1e-5)
    assert rep.bound == pytest.approx(0.015708, abs=1e-6)
    assert rep.ratio == pytest.approx(1.017, abs=1e-3)


def test_verify_boundary_quadratic_scaling(disk, image):
    deltas = [0.02, 0.01, 0.005]
    t = [verify_boundary_bound(disk, image, d, 0.5).measured for d in deltas]
    assert t[0] / t[1] == pytest.approx(4.0, rel=0.05)
    slope = np.polyfit(np.log(deltas), np.log(t), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.05)


def test_verify_boundary_with_spectators(disk, image):
    rep = verify_boundary_bound(disk, image, 0.02, 0.5,
                                spectators=([(0.0, 0.3), (0.0, -0.3)], [1, -1]))
    assert rep.first_event == BOUNDARY_COLLISION and rep.first_event_ok
    assert rep.parameters["n"] == 3


@pytest.mark.parametrize("t, kappa", [(0.0, 2.0), (math.pi / 2, 0.25)])
def test_verify_boundary_ellipse(ellipse, bie_ellipse, t, kappa):
    # osculating disk of radius 1/kappa: T = 2 pi delta^2 (1 + kappa delta / 3 + ...)
    delta = 0.005
    rep = verify_boundary_bound(ellipse, bie_ellipse, delta, 0.3, boundary_parameter=t)
    assert rep.first_event_ok and rep.passed
    assert (rep.ratio - 1) / delta == pytest.approx(kappa / 3, rel=0.03)


def test_verify_boundary_errors(disk, image):
    with pytest.raises(ParameterOrder):
        verify_boundary_bound(disk, image, 0.5, 0.5)
    with pytest.raises(NotInRegion):
        verify_boundary_bound(disk, image, 0.05, 0.5, spectators=([(0.0, 0.1), (0.0, -0.1)], [1, 1]))


def test_verify_pair_example(big_disk):
    dom, eng = big_disk
    rep = verify_pair_bound(dom, eng, 0.1, 1.0)
    assert rep.bound == pytest.approx(0.015866, abs=1e-6)
    assert rep.first_event_ok and rep.passed
    assert rep.measured == pytest.approx(0.015708, rel=0.01)


def test_verify_pair_small_zeta_limit(big_disk):
    dom, eng = big_disk
    for z in (0.05, 0.02):
        rep = verify_pair_bound(dom, eng, z, 1.0)
        assert rep.measured / (math.pi * z**2 / 2) == pytest.approx(1.0, rel=0.02)


def test_verify_pair_with_spectator(big_disk):
    dom, eng = big_disk
    rep = verify_pair_bound(dom, eng, 0.05, 1.0, spectators=([(0.0, 1.01)], [1]))
    assert rep.first_event_ok and rep.first_event == PAIR_COLLISION
    assert rep.parameters["n"] == 3


def test_pair_bound_degenerate():
    assert pair_bound(0.1, 1.0, 2) == pytest.approx(math.pi * 0.01 / (2 * 0.99))
    with pytest.raises(BoundDegenerate):
        pair_bound(0.5, 1.0, 3)


def test_verify_pair_errors(big_disk, disk, image):
    dom, eng = big_disk
    with pytest.raises(ParameterOrder):
        verify_pair_bound(dom, eng, 1.0, 0.5)
    with pytest.raises(NotInRegion):
        verify_pair_bound(disk, image, 0.1, 0.99)


def test_deterministic(disk, image):
    cfg = Configuration([(0.6, 0.2), (-0.3, 0.4)], [1, -1], disk)
    opts = SimulationOptions(T_max=0.05)
    a, b = simulate(cfg, image, opts), simulate(cfg, image, replace(opts))
    assert np.array_equal(a.times, b.times)
    assert np.array_equal(a.positions, b.positions)
