import numpy as np
import pytest

from geodom import domain as dm
from geodom import manifold as mf
from geodom.errors import BoundaryReachError, DegenerateGradientError, UnusableRegionError, WrongSideError

E2 = mf.euclidean(2)


@pytest.fixture
def punctured():
    return dm.Barrier(mf.polar_inverse_r2(), dm.radial_r())


@pytest.fixture
def quadrant():
    return dm.Barrier(E2, dm.sqrt_xy())


def test_punctured_flow_closed_form(punctured):
    assert dm.flow(punctured, np.array([3.0, 1.0]), 1.0) == pytest.approx([2.0, 1.0], abs=1e-12)
    rng = np.random.default_rng(0)
    X = np.column_stack([rng.uniform(0.2, 3.0, 200), rng.uniform(0, 2 * np.pi, 200)])
    S = rng.uniform(-1.0, 1.0, 200) * X[:, 0] * 0.9
    Y = dm.flow(punctured, X, S)
    assert np.max(np.abs(Y - np.column_stack([X[:, 0] - S, X[:, 1]]))) < 1e-8


def test_half_plane_flow_is_translation():
    b = dm.Barrier(E2, dm.half_plane_y())
    assert dm.flow(b, np.array([0.3, 2.0]), 1.5) == pytest.approx([0.3, 0.5], abs=1e-13)
    assert dm.flow(b, np.array([0.3, 2.0]), 0.0) == pytest.approx([0.3, 2.0])


def test_flow_first_integral_and_semigroup(quadrant):
    rng = np.random.default_rng(1)
    X = rng.uniform(0.5, 3.0, size=(100, 2))
    phi = quadrant.value(X)
    s1 = 0.3 * phi
    s2 = 0.4 * phi
    Y1 = dm.flow(quadrant, X, s1)
    assert np.max(np.abs(quadrant.value(Y1) - (phi - s1))) < 1e-7
    Y12 = dm.flow(quadrant, Y1, s2)
    Y = dm.flow(quadrant, X, s1 + s2)
    assert np.max(np.abs(Y12 - Y)) < 1e-7


def test_flow_errors(quadrant):
    with pytest.raises(BoundaryReachError):
        dm.flow(quadrant, np.array([1.0, 1.0]), 1.0)
    with pytest.raises(BoundaryReachError):
        dm.flow(quadrant, np.array([-1.0, 1.0]), 0.1)
    flat = dm.Barrier(E2, mf.ScalarField(lambda p: 1.0 + 0.0 * p[..., 0]))
    with pytest.raises(DegenerateGradientError):
        dm.flow(flat, np.array([0.0, 0.0]), 0.5)


def test_project_to_level(quadrant):
    y = dm.project_to_level(quadrant, np.array([4.0, 1.0]), 1.0)
    assert quadrant.value(y) == pytest.approx(1.0, abs=1e-12)
    x = np.array([2.0, 0.5])
    assert dm.project_to_level(quadrant, x, 1.0) == pytest.approx(x)
    with pytest.raises(WrongSideError):
        dm.project_to_level(quadrant, np.array([1.0, 1.0]), 2.0)


def test_flow_bounds_chart_closed_forms(punctured):
    fb = dm.flow_derivative_bounds(punctured, dm.Box((0.1, 0.0), (2.0, 2 * np.pi)), np.inf, 50, seed=3, a_floor=0.05)
    assert fb.C1 == pytest.approx(1.0, abs=1e-6)
    assert fb.C2 < 1e-6
    # the metric-weighted derivative is not bounded near r = 0
    assert fb.C1_metric > 10.0
    b = dm.Barrier(E2, dm.half_plane_y())
    fb = dm.flow_derivative_bounds(b, dm.Box((-1.0, 0.0), (1.0, 2.0)), 1.0, 50, seed=3)
    assert fb.C1 == pytest.approx(1.0, abs=1e-6) and fb.C2 < 1e-6


def test_flow_bounds_errors(quadrant):
    with pytest.raises(ValueError):
        dm.flow_derivative_bounds(quadrant, dm.Box((0, 0), (1, 1)), 1.0, 0, seed=0)
    with pytest.raises(UnusableRegionError):
        dm.flow_derivative_bounds(quadrant, dm.Box((-2.0, 1.0), (-1.0, 2.0)), 1.0, 10, seed=0)


def test_level_schedule_validation():
    with pytest.raises(ValueError):
        dm.Barrier(E2, dm.half_plane_y(), (0.5, 0.5))
    with pytest.raises(ValueError):
        dm.Barrier(E2, dm.half_plane_y(), (0.5, -0.1))
    assert dm.geometric_levels(1.0, 3) == (1.0, 0.5, 0.25)


def test_helix_barrier_is_c2():
    b = dm.Barrier(mf.flat_cylinder(), dm.dist_to_helix(1.0, 0.3))
    c = 1.0 / (2 * np.pi)
    # the cap edge sits at distance = width; curvature is continuous across it
    edge = np.array([0.0, 0.3 * np.hypot(1.0, c)])
    lo = b.phi.hess(edge - 1e-7 * np.array([0, 1]))
    hi = b.phi.hess(edge + 1e-7 * np.array([0, 1]))
    assert np.allclose(lo, hi, atol=1e-5)
    assert b.value(edge) == pytest.approx(0.12)
    assert b.value(np.array([[2 * np.pi * 0.25, 0.25]]))[0] == pytest.approx(0.0, abs=1e-15)
