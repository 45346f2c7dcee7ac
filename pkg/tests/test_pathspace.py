import io
import json

import numpy as np
import pytest

from geodom import domain as dm
from geodom import manifold as mf
from geodom import pathspace as ps
from geodom.errors import BoundaryViolationError, ChartDomainError
from geodom.solver import initial_path

E2 = mf.euclidean(2)


def fd_grad(path, b, eps, h=1e-6):
    base = path.nodes.copy()
    out = np.zeros((path.K - 1, path.dim))
    for i in range(1, path.K):
        for k in range(path.dim):
            up = base.copy()
            dn = base.copy()
            up[i, k] += h
            dn[i, k] -= h
            fu = ps.penalized_energy(ps.DiscretePath(up), b, eps).f_eps
            fd = ps.penalized_energy(ps.DiscretePath(dn), b, eps).f_eps
            out[i - 1, k] = (fu - fd) / (2 * h)
    return out


def random_path(p, q, b, K, rng, winding=None, scale=0.05):
    """Seeded random perturbation of the default seed path, kept inside the domain."""
    base = initial_path(p, q, b, K, winding)
    noise = rng.normal(size=base.interior().shape)
    for _ in range(40):
        cand = base.with_interior(base.interior() + scale * noise)
        if np.all(b.inside(cand.nodes)) and ps.max_dip_ratio(cand, b) > 0.25:
            return cand
        scale *= 0.5
    return base


def test_energy_closed_forms():
    assert ps.energy(ps.DiscretePath.linear([0, 0], [1, 0], 9), E2) == pytest.approx(0.5)
    assert ps.energy(ps.DiscretePath.linear([1, 2], [2, 1], 9), E2) == pytest.approx(1.0)
    cyl = mf.flat_cylinder()
    loop = ps.DiscretePath.linear([0.0, 0.0], [2 * np.pi, 0.0], 50)
    assert ps.energy(loop, cyl) == pytest.approx(2 * np.pi**2)
    assert loop.winding(cyl) == {0: 1}


def test_energy_reversal_invariant(rng):
    m = mf.polar_inverse_r2()
    nodes = np.column_stack([rng.uniform(0.5, 2, 12), rng.uniform(0, 6, 12)])
    path = ps.DiscretePath(nodes)
    assert ps.energy(path, m) == pytest.approx(ps.energy(path.reversed(), m), rel=1e-13)
    with pytest.raises(ChartDomainError):
        ps.energy(ps.DiscretePath([[1.0, 0.0], [-1.0, 0.0], [1.0, 1.0]]), m)


def test_penalty_quadrature_example():
    b = dm.Barrier(E2, dm.half_plane_y())
    path = ps.DiscretePath([[0, 1], [1, 1], [2, 1]])
    ev = ps.penalized_energy(path, b, 0.1)
    assert ev.penalty == pytest.approx(0.15, abs=1e-15)
    assert ps.penalized_energy(path, b, 0.2).penalty == 2 * ev.penalty
    assert ev.grad.shape == (1, 2)
    assert len(ev.E_profile) == 2 and len(ev.lambda_profile) == 3


def test_penalty_monotone_as_path_approaches_boundary():
    b = dm.Barrier(E2, dm.half_plane_y())
    vals = []
    for depth in (0.5, 0.7, 0.9, 0.99):
        t = np.linspace(0, 1, 21)
        nodes = np.column_stack([2 * t, 1.0 - depth * np.sin(np.pi * t)])
        vals.append(ps.penalized_energy(ps.DiscretePath(nodes), b, 0.1).penalty)
    assert np.all(np.diff(vals) > 0)


def test_boundary_violation_names_node():
    b = dm.Barrier(E2, dm.half_plane_y())
    with pytest.raises(BoundaryViolationError) as exc:
        ps.penalized_energy(ps.DiscretePath([[0, 1], [1, -0.1], [2, 1]]), b, 0.1)
    assert exc.value.node == 1


def test_gradient_matches_fd_quadrant(rng):
    b = dm.Barrier(E2, dm.sqrt_xy())
    path = random_path([1.0, 2.0], [2.0, 1.0], b, 19, rng, scale=0.2)
    for eps in (0.5, 1e-3, 0.0):
        g = ps.penalized_energy(path, b, eps).grad
        ref = fd_grad(path, b, eps)
        assert np.linalg.norm(g - ref) / np.linalg.norm(ref) < 1e-6


def test_gradient_matches_fd_all_gallery(problems, rng):
    worst = 0.0
    for pd in problems.values():
        b = pd.barrier
        wind = pd.winding if pd.winding is not None else (pd.classes[-1] if pd.classes else None)
        if pd.name == "cylinder_minus_helix":
            wind = 1
        for _ in range(3):
            path = random_path(pd.p, pd.q, b, 19, rng, wind)
            g = ps.penalized_energy(path, b, 0.1).grad
            ref = fd_grad(path, b, 0.1)
            worst = max(worst, np.linalg.norm(g - ref) / max(np.linalg.norm(ref), 1e-12))
    assert worst < 1e-5


def test_el_residual_straight_and_shot():
    b = dm.Barrier(E2, dm.half_plane_y())
    assert ps.el_residual(ps.DiscretePath.linear([0, 1], [3, 2], 20), b, 0.0) < 1e-10
    m = mf.polar_inverse_r2()
    sol = mf.geodesic_shoot(m, np.array([1.0, 0.0]), np.array([0.4, 0.9]), 1.0, 4000)
    path = ps.DiscretePath(sol.x[::20])
    assert path.K == 200
    res = ps.el_residual(path, dm.Barrier(m, dm.radial_r()), 0.0)
    assert res < 1e-3
    with pytest.raises(ValueError):
        ps.el_residual(ps.DiscretePath.linear([0, 1], [1, 1], 3), b, 0.0)


def test_serialization_round_trip():
    b = dm.Barrier(mf.flat_cylinder(), dm.Barrier.whole_chart(mf.flat_cylinder()).phi)
    path = ps.DiscretePath.linear([0.0, 0.0], [2 * np.pi, 1.0], 8)
    text = ps.path_to_csv(path, b)
    rows = text.strip().split("\n")
    assert rows[0] == "s,x0,x1,phi,speed_g" and len(rows) == 10
    buf = io.StringIO()
    ps.path_to_csv(path, b, buf)
    assert buf.getvalue() == text
    d = json.loads(ps.path_to_json(path, b.manifold, {"note": 1}))
    assert d["winding"] == {"0": 1}
    assert np.array_equal(ps.path_from_dict(d).nodes, path.nodes)


def test_path_is_immutable():
    path = ps.DiscretePath.linear([0, 0], [1, 1], 4)
    with pytest.raises(ValueError):
        path.nodes[1, 0] = 3.0
    with pytest.raises(ValueError):
        ps.DiscretePath([[0, 0], [1, 1]])
