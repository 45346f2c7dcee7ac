import json
import warnings

import numpy as np
import pytest

from geodom import convexity as cv
from geodom import domain as dm
from geodom import manifold as mf

E2 = mf.euclidean(2)
SQ = dm.Barrier(E2, dm.sqrt_xy())
XY = dm.Barrier(E2, dm.xy())
HALF = dm.Barrier(E2, dm.half_plane_y())
DISK = dm.Barrier(E2, dm.unit_disk())
PUNCT = dm.Barrier(mf.polar_inverse_r2(), dm.radial_r())
QBOX = dm.Box((1e-6, 1e-6), (3.0, 3.0))


def small_cfg(box, **kw):
    return cv.HypothesisConfig(box=box, n_samples=60, flow_samples=30, **kw)


def test_level_sample_examples():
    pts = cv.level_sample(HALF, 1.0, 20, 0, dm.Box((-2, 0), (2, 3)))
    assert pts.shape == (20, 2) and np.allclose(pts[:, 1], 1.0, atol=1e-12)
    pts = cv.level_sample(SQ, 1.0, 30, 0, QBOX)
    assert np.max(np.abs(pts[:, 0] * pts[:, 1] - 1.0)) < 2e-9
    pts = cv.level_sample(PUNCT, 0.3, 20, 0, dm.Box((1e-6, 0), (2, 6.28)))
    assert np.allclose(pts[:, 0], 0.3, atol=1e-12)
    a = cv.level_sample(SQ, 0.5, 10, 7, QBOX)
    assert np.array_equal(a, cv.level_sample(SQ, 0.5, 10, 7, QBOX))


def test_level_sample_sparse_warning():
    with pytest.warns(cv.SparseLevelWarning):
        pts = cv.level_sample(HALF, 5.0, 10, 0, dm.Box((-1, 0), (1, 1)))
    assert len(pts) == 0


def test_estimate_M_examples():
    for a in (0.5, 0.1):
        pts = cv.level_sample(DISK, a, 20, 0, dm.Box((-1, -1), (1, 1)))
        assert cv.estimate_M(DISK, a, pts, "tangent") == pytest.approx(-2.0 / a, rel=1e-9)
    pts = cv.level_sample(HALF, 0.3, 20, 0, dm.Box((-2, 0), (2, 3)))
    assert abs(cv.estimate_M(HALF, 0.3, pts)) < 1e-9
    # tangent Hessian of sqrt(xy) on xy = 1 along (x, -y) is -sqrt(xy), so M = -1/(x^2+y^2)
    pts = cv.level_sample(SQ, 1.0, 30, 0, QBOX)
    ref = np.max(-1.0 / np.sum(pts**2, axis=1))
    assert cv.estimate_M(SQ, 1.0, pts) == pytest.approx(ref, rel=1e-6)
    assert cv.estimate_M(SQ, 1.0, pts, "tangent") <= cv.estimate_M(SQ, 1.0, pts, "all") + 1e-12


def test_direction_ratio_is_zero_homogeneous():
    x = np.array([2.0, 0.5])
    v = np.array([2.0, -0.5])
    assert cv.direction_ratio(SQ, x, v) == pytest.approx(cv.direction_ratio(SQ, x, 3 * v), abs=1e-12)


def test_quadrant_gradient_pattern():
    rep = cv.check_hypotheses(SQ, small_cfg(QBOX))
    assert rep.verdicts["ii_lower"].status == "pass"
    assert rep.verdicts["ii_upper"].status == "fail"
    assert rep.verdicts["t0"].status == "pass"
    # near-diagonal points on xy = a are rare under projection; use the gallery count
    rep = cv.check_hypotheses(XY, cv.HypothesisConfig(box=QBOX, n_samples=100, flow_samples=20, checks=("ii",)))
    assert rep.verdicts["ii_upper"].status == "pass"
    assert rep.verdicts["ii_lower"].status == "fail"


def test_punctured_plane_pattern():
    rep = cv.check_hypotheses(PUNCT, small_cfg(dm.Box((1e-6, 0.0), (2.0, 2 * np.pi))))
    assert rep.verdicts["t2"].status == "pass"
    assert rep.verdicts["iii"].status == "indeterminate"
    assert rep.verdicts["t1"].status == "indeterminate"
    assert "metric norm" in rep.verdicts["t1"].reason
    for row in rep.per_level:
        assert row.flow_C1 == pytest.approx(1.0, abs=1e-6)


def test_convex_and_nonconvex_signs():
    for b, box in ((DISK, dm.Box((-1, -1), (1, 1))), (HALF, dm.Box((-2, 0), (2, 2)))):
        rep = cv.check_hypotheses(b, small_cfg(box, checks=("t0",)))
        assert max(r.M_tangent for r in rep.per_level) <= 1e-9
        assert rep.verdicts["t0"].status == "pass"
    sine = dm.Barrier(E2, dm.sine_half_plane(0.5))
    rep = cv.check_hypotheses(sine, small_cfg(dm.Box((-4, -1), (4, 3)), checks=("t0",)))
    assert rep.per_level[-1].M_tangent > 0 and rep.verdicts["t0"].status == "fail"


def test_report_invariants_and_serialization():
    rep = cv.check_hypotheses(SQ, small_cfg(QBOX))
    for r in rep.per_level:
        assert r.M_tangent <= r.M_all + 1e-12
        assert r.grad_min <= r.grad_max
    d = json.loads(rep.to_json())
    assert set(d) == {"per_level", "flow_bounds", "verdicts"}
    assert "M_tangent" in rep.table()
    again = cv.check_hypotheses(SQ, small_cfg(QBOX))
    assert again.to_json() == rep.to_json()


def test_gordon_check():
    h = mf.ScalarField(lambda x: 1.0 / DISK.value(x))
    rep = cv.check_hypotheses(DISK, small_cfg(dm.Box((-1, -1), (1, 1)), checks=("t0",), gordon_h=h))
    assert rep.verdicts["gordon"].status == "pass"
    # a concave h fails
    bad = mf.ScalarField(lambda x: 2.0 - np.sum(x * x, axis=-1))
    rep = cv.check_hypotheses(DISK, small_cfg(dm.Box((-1, -1), (1, 1)), checks=("t0",), gordon_h=bad))
    assert rep.verdicts["gordon"].status == "fail"


def test_rescaling_check():
    pts = cv.level_sample(HALF, 1.0, 20, 0, dm.Box((-2, 0), (2, 3)))
    assert cv.rescaling_check(HALF, lambda t: t, lambda t: np.ones_like(t), 1.0, pts) < 1e-12
    assert cv.rescaling_check(HALF, lambda t: t**2, lambda t: 2 * t, 1.0, pts) < 1e-6
    pts = cv.level_sample(XY, 1.0, 20, 0, QBOX)
    assert cv.rescaling_check(XY, np.sqrt, lambda t: 0.5 / np.sqrt(t), 1.0, pts) < 1e-5
    with pytest.raises(ValueError):
        cv.rescaling_check(XY, lambda t: -t, lambda t: -np.ones_like(t), 1.0, pts)


def test_growth_exponent():
    a = np.array(dm.geometric_levels())
    assert cv.growth_exponent(a, 1.0 / a) == pytest.approx(1.0)
    assert abs(cv.growth_exponent(a, 3.0 + 0 * a)) < 1e-12
    assert cv.growth_exponent(a, 1e-9 * np.ones_like(a)) == 0.0
