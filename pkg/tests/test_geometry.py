import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dislocore import Domain, in_region_C, in_region_D, separation
from dislocore.errors import EmptyConfiguration, GeometryError, ParameterOrder


@pytest.mark.parametrize("point, inside", [
    ((0.0, 0.0), True),
    ((1.0, 0.0), False),
    ((0.3, 0.4), True),
    ((0.0, -1.2), False),
])
def test_unit_disk_contains(disk, point, inside):
    assert disk.contains(point) is inside


def test_ellipse_contains(ellipse):
    assert ellipse.contains((1.9, 0.0))
    assert not ellipse.contains((2.0, 0.05))
    assert not ellipse.contains((0.0, 1.01))
    assert ellipse.contains((0.0, 0.99))


def test_nearest_boundary_disk(disk):
    proj = disk.nearest_boundary((0.9, 0.0))
    assert proj.distance == pytest.approx(0.1, abs=1e-15)
    np.testing.assert_allclose(proj.boundary_point.position, [1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(proj.boundary_point.outward_normal, [1.0, 0.0], atol=1e-15)
    assert not proj.ambiguous


def test_nearest_boundary_center_is_flagged(disk):
    proj = disk.nearest_boundary((0.0, 0.0))
    assert proj.distance == pytest.approx(1.0)
    assert proj.ambiguous
    # deterministic representative: smallest arc parameter
    assert proj.boundary_point.arc_parameter == 0.0


def test_nearest_boundary_shifted_disk():
    dom = Domain.disk((1.0, 1.0), 2.0)
    proj = dom.nearest_boundary((1.0, 2.5))
    assert proj.distance == pytest.approx(0.5)
    np.testing.assert_allclose(proj.boundary_point.position, [1.0, 3.0], atol=1e-14)
    np.testing.assert_allclose(proj.boundary_point.outward_normal, [0.0, 1.0], atol=1e-14)


def test_nearest_boundary_ellipse_newton(ellipse):
    p = np.array([1.2, 0.5])
    proj = ellipse.nearest_boundary(p)
    # brute force over a fine parametrisation
    t = np.linspace(0, 2 * np.pi, 200001)
    pts = np.column_stack([2 * np.cos(t), np.sin(t)])
    ref = np.min(np.hypot(*(pts - p).T))
    assert proj.distance == pytest.approx(ref, abs=1e-9)
    bp = proj.boundary_point
    # residual p = s - d nu
    np.testing.assert_allclose(bp.position - proj.distance * bp.outward_normal, p, atol=1e-9)
    assert abs(bp.outward_normal @ bp.tangent) < 1e-12
    assert np.linalg.norm(bp.outward_normal) == pytest.approx(1.0, abs=1e-12)


def test_uniform_disk_radius():
    assert Domain.unit_disk().uniform_disk_radius() == 1.0
    assert Domain.disk(radius=2.0).uniform_disk_radius() == 2.0
    # min radius of curvature of an ellipse is b^2 / a
    assert Domain.ellipse(2.0, 1.0).uniform_disk_radius() == pytest.approx(0.5, rel=1e-6)


def test_curvature_bound(ellipse):
    t = np.linspace(0, 2 * np.pi, 1000, endpoint=False)
    assert np.max(np.abs(ellipse.curvature(t))) <= 1.0 / ellipse.uniform_disk_radius() + 1e-9


def test_ellipse_perimeter(ellipse):
    # Ramanujan's second approximation is accurate to ~1e-10 here
    a, b = 2.0, 1.0
    h = ((a - b) / (a + b)) ** 2
    ref = math.pi * (a + b) * (1 + 3 * h / (10 + math.sqrt(4 - 3 * h)))
    assert ellipse.perimeter == pytest.approx(ref, rel=1e-8)


def test_curve_orientation_is_counterclockwise():
    t = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    clockwise = np.column_stack([np.cos(-t), np.sin(-t)])
    dom = Domain.from_samples(clockwise)
    tau, nu, kappa, _ = dom.frame(0.3)
    p = dom.boundary(0.3)
    # outward normal points away from the centre and curvature is positive
    assert p @ nu > 0
    assert kappa == pytest.approx(1.0, rel=1e-8)


def test_self_intersecting_curve_rejected():
    t = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    figure_eight = np.column_stack([np.sin(t), np.sin(t) * np.cos(t)])
    with pytest.raises(GeometryError):
        Domain.from_samples(figure_eight)


def test_nonconvex_flag():
    t = np.linspace(0, 2 * np.pi, 128, endpoint=False)
    r = 1 + 0.3 * np.cos(3 * t)
    dom = Domain.from_samples(np.column_stack([r * np.cos(t), r * np.sin(t)]))
    assert not dom.convex
    assert Domain.ellipse(2.0, 1.0).convex


def test_ray_exit_ellipse(ellipse):
    d = np.array([[math.cos(0.7), math.sin(0.7)]])
    o = np.array([0.3, -0.2])
    r = ellipse.ray_exit(o, d)[0]
    q = o + r * d[0]
    assert (q[0] / 2) ** 2 + q[1] ** 2 == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("points, expected", [
    ([(0.9, 0.0)], 0.1),
    ([(0.5, 0.0), (-0.5, 0.0)], 0.5),
    ([(0.1, 0.0), (-0.1, 0.0)], 0.2),
])
def test_separation(disk, points, expected):
    assert separation(points, disk) == pytest.approx(expected)


def test_separation_empty(disk):
    with pytest.raises(EmptyConfiguration):
        separation([], disk)


def test_region_D_examples(disk):
    assert in_region_D(disk, [(0.97, 0.0), (0.0, 0.2)], 0.05, 0.5)
    assert not in_region_D(disk, [(0.97, 0.0), (0.0, 0.6)], 0.05, 0.5)
    with pytest.raises(ParameterOrder):
        in_region_D(disk, [(0.97, 0.0)], 0.5, 0.5)


def test_region_C_examples(disk):
    assert not in_region_C(disk, [(0.05, 0.0), (-0.05, 0.0), (0.0, 0.0)], 0.2, 0.3)
    assert in_region_C(disk, [(0.05, 0.0), (-0.05, 0.0)], 0.2, 0.3)
    with pytest.raises(ParameterOrder):
        in_region_C(disk, [(0.05, 0.0), (-0.05, 0.0)], 0.3, 0.2)


coords = st.floats(-0.69, 0.69)
point = st.tuples(coords, coords)


@settings(max_examples=60, deadline=None)
@given(st.lists(point, min_size=1, max_size=5), st.randoms(use_true_random=False))
def test_separation_permutation_invariant(points, rnd):
    dom = Domain.unit_disk()
    shuffled = list(points)
    rnd.shuffle(shuffled)
    assert separation(points, dom) == pytest.approx(separation(shuffled, dom), abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 2 * np.pi), st.floats(0.01, 0.45))
def test_projection_identity_ellipse(t, depth):
    dom = Domain.ellipse(2.0, 1.0)
    _, nu, _, _ = dom.frame(t)
    p = dom.boundary(t) - depth * nu
    proj = dom.nearest_boundary(p)
    bp = proj.boundary_point
    np.testing.assert_allclose(bp.position - proj.distance * bp.outward_normal, p, atol=1e-9)
    assert proj.distance == pytest.approx(depth, abs=1e-9)


@settings(max_examples=80, deadline=None)
@given(st.lists(point, min_size=1, max_size=4), st.floats(0.01, 0.2), st.floats(0.2, 0.6),
       st.floats(0.0, 0.2), st.floats(0.0, 0.2))
def test_region_D_monotone(points, delta, gamma, dd, dg):
    dom = Domain.unit_disk()
    pts = [(0.97, 0.0)] + points
    d2, g2 = delta + dd, gamma - dg
    if d2 >= g2 or delta >= gamma:
        return
    if in_region_D(dom, pts, delta, gamma):
        assert in_region_D(dom, pts, d2, g2)
