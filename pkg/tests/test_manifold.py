import numpy as np
import pytest
import sympy as sp

from geodom import manifold as mf
from geodom.errors import ChartDomainError, EscapeError, IllConditionedMetricError
from geodom.jacobi import conformal, harmonic
from oracles import christoffel_symbolic, cov_hessian_symbolic, r, th, x, y


def test_polar_christoffel_matches_symbolic():
    g = sp.Matrix([[1, 0], [0, r**-2]])
    G = christoffel_symbolic(g, (r, th))
    m = mf.polar_inverse_r2()
    for rv in (0.3, 1.0, 2.5):
        num = mf.christoffel(m, np.array([rv, 0.7]))
        for k in range(2):
            for i in range(2):
                for j in range(2):
                    ref = float(G[k][i][j].subs(r, rv))
                    assert num[k, i, j] == pytest.approx(ref, abs=1e-12)
    # hand values
    assert float(G[0][1][1].subs(r, 2.0)) == pytest.approx(2.0**-3)
    assert float(G[1][0][1].subs(r, 2.0)) == pytest.approx(-0.5)


def test_fd_christoffel_matches_analytic():
    m = mf.polar_inverse_r2()
    fd = mf.ChartManifold(2, m.metric, None, m.periodic_axes, m.chart_domain)
    X = np.array([[0.5, 1.0], [1.7, -2.0]])
    assert np.allclose(mf.christoffel(fd, X), mf.christoffel(m, X), atol=1e-7)


def test_radial_hessian_sign_on_punctured_plane():
    # H_phi for phi = r under dr^2 + r^-2 dtheta^2 is diag(0, -r^-3)
    g = sp.Matrix([[1, 0], [0, r**-2]])
    H = cov_hessian_symbolic(r, g, (r, th))
    assert sp.simplify(H[1, 1] + r**-3) == 0
    m = mf.polar_inverse_r2()
    phi = mf.ScalarField(lambda p: p[..., 0])
    Hn = mf.cov_hessian(m, phi, np.array([1.0, 0.4]))
    assert Hn[0, 0] == pytest.approx(0.0, abs=1e-6)
    assert Hn[1, 1] == pytest.approx(-1.0, abs=1e-6)


def test_sqrt_xy_tangent_hessian():
    f = sp.sqrt(x * y)
    H = cov_hessian_symbolic(f, sp.eye(2), (x, y))
    v = sp.Matrix([x, -y])
    val = sp.simplify((v.T * H * v)[0, 0])
    assert sp.simplify(val + sp.sqrt(x * y)) == 0
    m = mf.euclidean(2)
    phi = mf.ScalarField(lambda p: np.sqrt(p[..., 0] * p[..., 1]))
    p = np.array([2.0, 0.5])
    Hn = mf.cov_hessian(m, phi, p)
    vv = np.array([2.0, -0.5])
    assert vv @ Hn @ vv == pytest.approx(-1.0, rel=1e-6)


@pytest.mark.parametrize(
    "m, x0, v0",
    [
        (mf.euclidean(2), [0.0, 0.0], [1.0, 0.5]),
        (mf.polar_inverse_r2(), [1.0, 0.0], [0.3, 0.8]),
        (mf.flat_cylinder(), [0.0, 0.0], [1.0, 0.3]),
        (conformal(mf.euclidean(2), 2.0, harmonic()), [0.0, 0.5], [0.2, 0.6]),
    ],
)
def test_geodesic_speed_conserved(m, x0, v0):
    sol = mf.geodesic_shoot(m, np.array(x0), np.array(v0), 1.0, 1000)
    speed = mf.norm_sq(m, sol.x, sol.v)
    assert np.max(np.abs(speed / speed[0] - 1.0)) < 1e-8


def test_geodesic_escape_carries_last_state():
    m = mf.polar_inverse_r2()
    with pytest.raises(EscapeError) as exc:
        mf.geodesic_shoot(m, np.array([0.5, 0.0]), np.array([-1.0, 0.0]), 1.0, 100)
    t, xl, vl = exc.value.last_state
    assert 0.0 < t < 1.0 and xl[0] > 0.0


def test_metric_validation():
    bad_sym = mf.ChartManifold(2, lambda p: np.array([[1.0, 0.5], [0.0, 1.0]]))
    bad_def = mf.ChartManifold(2, lambda p: np.diag([1.0, -1.0]))
    bad_cond = mf.ChartManifold(2, lambda p: np.diag([1.0, 1e-13]))
    for m in (bad_sym, bad_def, bad_cond):
        with pytest.raises(IllConditionedMetricError):
            m.g(np.zeros(2))
    with pytest.raises(ChartDomainError):
        mf.polar_inverse_r2().g(np.array([-1.0, 0.0]))


def test_inner_requires_same_base():
    m = mf.euclidean(2)
    u = mf.TangentVector([0.0, 0.0], [1.0, 0.0])
    v = mf.TangentVector([1.0, 0.0], [1.0, 0.0])
    with pytest.raises(ValueError):
        mf.inner(m, u, v)
    assert mf.inner(m, u, mf.TangentVector([0.0, 0.0], [2.0, 3.0])) == 2.0


def test_riemannian_gradient_and_wrap():
    m = mf.polar_inverse_r2()
    f = mf.ScalarField(lambda p: p[..., 1])
    gv = mf.riem_grad(m, f, np.array([2.0, 0.0]))
    # g^{theta theta} = r^2
    assert gv.comps == pytest.approx([0.0, 4.0], abs=1e-8)
    d = m.wrap_delta(np.array([0.0, 2 * np.pi - 0.1]))
    assert d[1] == pytest.approx(-0.1)


def test_fd_second_partials_without_derivatives():
    f = mf.ScalarField(lambda p: np.sin(p[..., 0]) * p[..., 1] ** 2)
    p = np.array([0.4, 1.3])
    H = f.second_partials(p)
    ref = np.array([[-np.sin(0.4) * 1.69, 2 * np.cos(0.4) * 1.3], [2 * np.cos(0.4) * 1.3, 2 * np.sin(0.4)]])
    assert np.allclose(H, ref, atol=1e-6)
