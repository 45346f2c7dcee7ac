import numpy as np
import pytest

from geodom import domain as dm
from geodom import jacobi as jc
from geodom import manifold as mf
from geodom import pathspace as ps
from geodom.errors import EnergyLevelError
from geodom.solver import SolverConfig, solve

import oracles

E2 = mf.euclidean(2)
HALF = dm.Barrier(E2, dm.half_plane_y())
HARM = jc.LagrangianProblem(E2, jc.harmonic(), 2.0, HALF)


def test_metric_examples():
    x = np.array([[0.3, 0.7], [1.0, 0.0]])
    free = jc.jacobi_metric(jc.LagrangianProblem(E2, jc.zero_potential(), 1.0))
    assert np.allclose(free.g(x), E2.g(x), rtol=0, atol=1e-15)
    jm = jc.jacobi_metric(jc.LagrangianProblem(E2, jc.harmonic(), 1.0))
    assert np.allclose(jm.g(np.zeros(2)), np.eye(2))
    assert np.allclose(jm.g(np.array([1.0, 0.0])), 0.5 * np.eye(2))
    with pytest.raises(EnergyLevelError):
        jm.g(np.array([np.sqrt(2.0), 0.0]))


def test_metric_derivative_matches_fd():
    jm = jc.jacobi_metric(HARM)
    x = np.array([0.4, 0.9])
    h = 1e-6
    fd = np.stack([(jm.g(x + h * e) - jm.g(x - h * e)) / (2 * h) for e in np.eye(2)])
    assert np.allclose(jm.dg(x), fd, atol=1e-8)


def test_hessian_identity_free_particle(rng):
    prob = jc.LagrangianProblem(E2, jc.zero_potential(), 1.0)
    X = rng.uniform([-1, 0.1], [1, 2], (50, 2))
    Vd = rng.normal(size=(50, 2))
    assert jc.hessian_transform_check(prob, HALF, X, Vd) < 1e-12


def test_hessian_identity_harmonic(rng):
    X = rng.uniform([-1, 0.05], [1, 1.3], (200, 2))
    Vd = rng.normal(size=(200, 2))
    assert jc.hessian_transform_check(HARM, HALF, X, Vd) < 1e-5


def test_hessian_against_symbolic():
    jm = jc.jacobi_metric(HARM)
    for x, v in (([0.3, 0.5], [1.0, 0.0]), ([-0.2, 1.1], [0.6, -0.8]), ([0.5, 0.2], [0.0, 1.0])):
        ref = oracles.jacobi_hessian_symbolic(x, v, E=2)
        got = float(np.einsum("i,ij,j", v, mf.cov_hessian(jm, HALF.phi, np.array(x)), v))
        assert got == pytest.approx(ref, abs=1e-6)


def test_hessian_orthogonal_direction():
    # v orthogonal to grad phi: the cross term drops out
    x = np.array([0.4, 0.8])
    v = np.array([1.0, 0.0])
    rhs = jc.jacobi_hessian_rhs(HARM, HALF, x, v)
    du = HARM.du(x)
    assert rhs == pytest.approx(du[1], rel=1e-12)


def test_rep_examples():
    box = dm.Box((-1.0, 0.0), (1.0, 1.5))
    levels = dm.geometric_levels()
    for V, E, ok in ((jc.zero_potential(), 1.0, True), (jc.quadratic_y(1.0), 2.0, True), (jc.linear_y(-1.0), 3.0, False)):
        prob = jc.LagrangianProblem(E2, V, E, HALF)
        M, verdict, per = jc.rep_check(prob, HALF, levels, 30, box)
        assert (verdict.status == "pass") is ok
        assert len(per) == len(levels)


def test_harmonic_trajectory_vs_shooting():
    p, q = np.array([0.0, 0.5]), np.array([0.0, 1.5])
    rep, traj = jc.solve_trajectory(HARM, p, q, SolverConfig(K=200))
    assert rep.converged and traj.converged
    sol, T = oracles.harmonic_shooting(p, q, 2.0)
    assert traj.t[-1] == pytest.approx(T, rel=1e-4)
    ref = sol(traj.t)
    assert np.max(np.linalg.norm(traj.x - ref, axis=1)) < 1e-3
    assert traj.energy_spread < 2e-5
    assert traj.ode_residual < 1e-3
    assert np.all(np.diff(traj.t) > 0)
    head = traj.to_csv().splitlines()[0]
    assert head == "t,x0,x1,speed,energy"


def test_free_particle_equals_geodesic():
    Q = dm.Barrier(E2, dm.sqrt_xy())
    prob = jc.LagrangianProblem(E2, jc.zero_potential(), 0.5, Q)
    p, q = np.array([1.0, 2.0]), np.array([2.0, 1.0])
    rep, traj = jc.solve_trajectory(prob, p, q)
    base = solve(p, q, Q)
    assert np.max(np.abs(rep.path.nodes - base.path.nodes)) < 1e-9
    # unit speed at E = 1/2, time equals length
    assert np.allclose(traj.speed, 1.0, atol=1e-9)
    assert traj.t[-1] == pytest.approx(np.sqrt(2.0), rel=1e-9)


def test_conformal_length_identity(rng):
    for _ in range(20):
        pts = rng.uniform([-0.8, 0.1], [0.8, 1.2], (5, 2))
        path = ps.DiscretePath.from_samples(pts, 40)
        X = path.nodes
        mid = X[:-1] + 0.5 * np.diff(X, axis=0)
        w = np.sqrt(2.0 - HARM.V(mid))
        direct = np.sum(w * np.linalg.norm(np.diff(X, axis=0), axis=1))
        assert jc.jacobi_length(HARM, path) == pytest.approx(direct, rel=1e-12)


def test_stationary_and_energy_errors():
    prob = jc.LagrangianProblem(E2, jc.harmonic(), 0.0)
    with pytest.raises(EnergyLevelError):
        jc.solve_trajectory(prob, np.zeros(2), np.zeros(2))
    low = jc.LagrangianProblem(E2, jc.harmonic(), 0.1, HALF)
    with pytest.raises(EnergyLevelError):
        jc.solve_trajectory(low, np.array([0.0, 0.5]), np.array([0.0, 1.5]))
    traj = jc._stationary(jc.LagrangianProblem(E2, jc.harmonic(), 0.0), np.zeros(2), 1e-3)
    assert np.all(traj.speed == 0) and traj.energy_spread == 0
