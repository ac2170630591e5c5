import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import random_disk_points
from dislocore import Domain, GreenEngine
from dislocore.errors import OutsideDomain, StencilOutsideDomain
from dislocore.green import LaplaceDirichletSolver


def test_image_examples(image):
    assert image.regular_part((0.0, 0.0), (0.5, 0.0)) == pytest.approx(0.0, abs=1e-15)
    assert image.regular_part((0.6, 0.0), (0.6, 0.0)) == pytest.approx(-0.0710, abs=5e-5)
    assert image.robin((0.0, 0.0)) == 0.0
    assert image.robin((0.8, 0.0)) == pytest.approx(math.log(0.36) / (2 * math.pi), rel=1e-14)
    np.testing.assert_allclose(image.grad_robin((0.5, 0.0)), [-0.5 / (math.pi * 0.75), 0.0],
                               atol=1e-15)
    np.testing.assert_allclose(image.grad_robin((0.0, 0.0)), [0.0, 0.0], atol=0)


def test_robin_closed_form(image, rng):
    for x in random_disk_points(rng, 50, 0.99):
        assert image.robin(x) == pytest.approx(oracles.disk_robin(x), abs=1e-10)


def test_robin_decreases_to_minus_infinity(image):
    r = np.linspace(0.0, 0.999999, 40)
    h = [image.robin((ri, 0.0)) for ri in r]
    assert np.all(np.diff(h) < 0)
    assert h[-1] < -2.0


def test_shifted_disk_against_oracle(rng):
    dom = Domain.disk((1.0, -2.0), 3.0)
    eng = GreenEngine(dom, "image")
    for _ in range(20):
        x, y = dom.center + random_disk_points(rng, 2, 2.7)
        ref = oracles.image_regular_part(x, y, 3.0, dom.center)
        assert eng.regular_part(x, y) == pytest.approx(ref, abs=1e-13)
        assert eng.robin(x) == pytest.approx(oracles.disk_robin(x, 3.0, dom.center), abs=1e-13)


def test_bie_matches_images(image, bie_disk, rng):
    pts = random_disk_points(rng, 200, 0.9)
    err = max(abs(bie_disk.regular_part(x, y) - oracles.image_regular_part(x, y))
              for x, y in zip(pts[:100], pts[100:]))
    assert err < 1e-6


def test_bie_gradients_match_images(image, bie_disk, rng):
    pts = random_disk_points(rng, 40, 0.85)
    for x, y in zip(pts[:20], pts[20:]):
        np.testing.assert_allclose(bie_disk.grad_regular(x, y), image.grad_regular(x, y), atol=1e-8)
        np.testing.assert_allclose(bie_disk.grad_robin(x), image.grad_robin(x), atol=1e-8)


@pytest.mark.parametrize("backend", ["image", "bie"])
def test_grad_robin_finite_difference(backend, disk, ellipse, rng):
    dom = disk if backend == "image" else ellipse
    eng = GreenEngine(dom, backend)
    h = 1e-5
    for x in [np.array([0.3, 0.2]), np.array([-0.4, 0.1]), np.array([0.1, -0.5])]:
        g = eng.grad_robin(x)
        fd = np.array([(eng.robin(x + h * e) - eng.robin(x - h * e)) / (2 * h)
                       for e in np.eye(2)])
        assert np.linalg.norm(g - fd) < 1e-5 * np.linalg.norm(g)


def test_symmetry(image, bie_ellipse, rng):
    for x, y in zip(random_disk_points(rng, 10, 0.9), random_disk_points(rng, 10, 0.9)):
        assert image.regular_part(x, y) == pytest.approx(image.regular_part(y, x), abs=1e-12)
        xe, ye = x * [1.8, 0.9], y * [1.8, 0.9]
        assert abs(bie_ellipse.regular_part(xe, ye) - bie_ellipse.regular_part(ye, xe)) < 1e-6


def test_green_vanishes_on_boundary(image):
    y = np.array([0.3, -0.4])
    for th in np.linspace(0, 2 * np.pi, 13):
        x = (1 - 1e-8) * np.array([math.cos(th), math.sin(th)])
        assert abs(image.green(x, y)) < 1e-6


def test_bie_green_vanishes_linearly_at_boundary(bie_ellipse, ellipse):
    y = np.array([0.4, 0.2])
    for t in np.linspace(0, 2 * np.pi, 9, endpoint=False):
        _, nu, _, _ = ellipse.frame(t)
        g = [bie_ellipse.green(ellipse.boundary(t) - d * nu, y) for d in (0.04, 0.02, 0.01)]
        # G = O(d): halving the distance halves G
        assert g[0] / g[1] == pytest.approx(2.0, rel=0.1)
        assert g[1] / g[2] == pytest.approx(2.0, rel=0.05)


def test_regular_part_is_harmonic_in_x(bie_ellipse):
    y = np.array([0.5, -0.3])
    x = np.array([-0.6, 0.2])

    def lap(step):
        e = np.eye(2) * step
        vals = [bie_ellipse.regular_part(x + s * d, y) for d in e for s in (1, -1)]
        return (sum(vals) - 4 * bie_ellipse.regular_part(x, y)) / step ** 2

    assert abs(lap(1e-2)) > abs(lap(5e-3)) or abs(lap(5e-3)) < 1e-6
    assert abs(lap(5e-3)) < 1e-5


def test_liouville_disk(image, rng):
    r = image.liouville_residual((0.3, 0.2), 1e-3)
    h = image.robin((0.3, 0.2))
    assert abs(r) < 1e-3 * (2 / math.pi) * math.exp(-4 * math.pi * h)
    # centre: -Lap h = 2 / pi
    assert abs(image.liouville_residual((0.0, 0.0), 1e-3)) < 1e-5


def test_liouville_ellipse_step_refinement(bie_ellipse):
    res = [abs(bie_ellipse.liouville_residual((0.3, 0.2), s)) for s in (0.1, 0.05, 0.025)]
    assert res[0] > res[1] > res[2]


def test_liouville_ellipse_panel_refinement(ellipse):
    x = (0.0, 0.7)
    coarse = GreenEngine(ellipse, "bie", 64).liouville_residual(x, 1e-3)
    fine = GreenEngine(ellipse, "bie", 256).liouville_residual(x, 1e-3)
    assert abs(fine) < abs(coarse)


def test_robin_panel_self_convergence(ellipse):
    x = (1.2, 0.6)
    vals = {p: GreenEngine(ellipse, "bie", p).robin(x) for p in (64, 128, 256, 512)}
    errs = [abs(vals[p] - vals[512]) for p in (64, 128, 256)]
    assert errs[0] > errs[1] > errs[2]


@pytest.mark.parametrize("x", [(0.0, 0.999), (1.999, 0.0), (1.2, 0.55)])
def test_bie_near_boundary_panel_independent(ellipse, bie_ellipse, x):
    coarse = GreenEngine(ellipse, "bie", 128)
    assert coarse.robin(x) == pytest.approx(bie_ellipse.robin(x), abs=1e-8)
    np.testing.assert_allclose(coarse.grad_robin(x), bie_ellipse.grad_robin(x),
                               rtol=1e-7, atol=1e-8)


def test_bie_near_boundary_disk(bie_disk, image):
    for x in [(0.999, 0.0), (0.0, -0.9999), (0.6, 0.79)]:
        assert bie_disk.robin(x) == pytest.approx(image.robin(x), abs=1e-9)
        g = image.grad_robin(x)
        assert np.linalg.norm(bie_disk.grad_robin(x) - g) < 1e-7 * np.linalg.norm(g)
        y = (0.3, 0.1)
        np.testing.assert_allclose(bie_disk.grad_regular(x, y), image.grad_regular(x, y), atol=1e-7)


def test_stencil_outside(image):
    with pytest.raises(StencilOutsideDomain):
        image.liouville_residual((0.999, 0.0), 1e-3)


def test_outside_domain(image, bie_ellipse):
    with pytest.raises(OutsideDomain):
        image.robin((1.0, 0.0))
    with pytest.raises(OutsideDomain):
        bie_ellipse.regular_part((0.0, 0.0), (2.5, 0.0))


def test_solver_condition_number(ellipse):
    solver = LaplaceDirichletSolver(ellipse, 128)
    assert solver.condition_number < 100


def test_solver_reproduces_harmonic_polynomial(ellipse):
    solver = LaplaceDirichletSolver(ellipse, 256)
    u = lambda p: p[..., 0] ** 2 - p[..., 1] ** 2 + 3 * p[..., 0] * p[..., 1]  # noqa: E731
    mu = solver.solve(u(solver.nodes))
    x = np.array([[0.2, 0.1], [1.5, -0.3], [-1.0, 0.6], [1.95, 0.0]])
    np.testing.assert_allclose(solver.evaluate(mu, x), u(x), atol=1e-6)
    grad = np.column_stack([2 * x[:, 0] + 3 * x[:, 1], -2 * x[:, 1] + 3 * x[:, 0]])
    np.testing.assert_allclose(solver.gradient(mu, x), grad, atol=1e-5)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 0.95), st.floats(0.0, 2 * np.pi), st.floats(0.0, 0.95),
       st.floats(0.0, 2 * np.pi))
def test_image_engine_matches_oracle(r1, t1, r2, t2):
    eng = GreenEngine(Domain.unit_disk(), "image")
    x = r1 * np.array([math.cos(t1), math.sin(t1)])
    y = r2 * np.array([math.cos(t2), math.sin(t2)])
    assert eng.regular_part(x, y) == pytest.approx(oracles.image_regular_part(x, y), abs=1e-12)
