"""Fixed-energy Lagrangian trajectories through the Jacobi metric.

For ``L = 1/2 <xdot, xdot> - V(x)`` and energy ``E > V`` the trajectories with
energy ``E`` are, up to reparametrization, the geodesics of ``(E - V) g``.
"""

import csv
import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .convexity import FAIL, PASS, Verdict, _level_points, growth_exponent
from .errors import EnergyLevelError, GeodomError
from .manifold import ChartManifold, ScalarField, christoffel, cov_hessian
from .pathspace import DiscretePath, speeds


@dataclass(frozen=True)
class LagrangianProblem:
    manifold: ChartManifold
    V: ScalarField
    E: float
    barrier: Optional[object] = None

    def check_energy(self, points):
        """Raise unless ``E - V > 0`` at every point; returns ``max V``."""
        X = np.atleast_2d(np.asarray(points, dtype=float))
        v = self.V(X)
        worst = int(np.argmax(v))
        if not v[worst] < self.E:
            raise EnergyLevelError(f"energy E = {self.E:g} does not exceed V = {v[worst]:g} at {X[worst]}")
        return float(v[worst])

    def u(self, x):
        return 0.5 * np.log(self.E - self.V(x))

    def du(self, x):
        return -0.5 * self.V.differential(x) / (self.E - self.V(x))[..., None]


def jacobi_metric(prob):
    """The conformal metric ``(E - V) g`` on ``chart domain and {V < E}``."""
    m = prob.manifold
    V, E = prob.V, float(prob.E)

    def metric(x):
        return (E - V(x))[..., None, None] * m.metric(x)

    def deriv(x):
        w = E - V(x)
        dV = V.differential(x)
        return w[..., None, None, None] * m.dg(x) - dV[..., :, None, None] * m.metric(x)[..., None, :, :]

    def chart(x):
        with np.errstate(invalid="ignore"):
            return m.in_chart(x) & (V(x) < E)

    return ChartManifold(
        m.dim,
        metric,
        deriv,
        m.periodic_axes,
        chart,
        name=f"jacobi({m.name}, E={E:g})",
        domain_error=EnergyLevelError,
    )


def conformal(base, E, V):
    """Builtin ``conformal(E,V)`` metric: the Jacobi metric of ``V`` at energy ``E``."""
    return jacobi_metric(LagrangianProblem(base, V, E))


def jacobi_hessian_rhs(prob, b, x, v):
    """Right side of the conformal Hessian relation computed in the base metric."""
    m = prob.manifold
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    G = m.g(x)
    H = cov_hessian(m, b.phi, x)
    dphi = b.differential(x)
    du = prob.du(x)
    grad_phi = np.linalg.solve(G, dphi[..., None])[..., 0]
    vv = np.einsum("...i,...ij,...j->...", v, G, v)
    return (
        np.einsum("...i,...ij,...j->...", v, H, v)
        + np.einsum("...i,...i->...", grad_phi, du) * vv
        - 2.0 * np.einsum("...i,...i->...", du, v) * np.einsum("...i,...i->...", dphi, v)
    )


def hessian_transform_check(prob, b, samples, directions):
    """Max of ``|H^E_phi[v,v] - rhs| / (1 + |H^E_phi[v,v]|)`` over paired samples."""
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    Vd = np.atleast_2d(np.asarray(directions, dtype=float))
    prob.check_energy(X)
    jm = jacobi_metric(prob)
    HE = cov_hessian(jm, b.phi, X)
    lhs = np.einsum("ni,nij,nj->n", Vd, HE, Vd)
    rhs = jacobi_hessian_rhs(prob, b, X, Vd)
    return float(np.max(np.abs(lhs - rhs) / (1.0 + np.abs(lhs))))


def rep_check(prob, b, levels, samples, box, seed=0, growth_threshold=0.25):
    """Estimate ``M'`` in ``<grad phi, grad V> >= -M' phi`` on the level sets.

    Returns ``(M_prime, verdict, per_level)``.  ``M_prime`` is the largest
    per-level value; the verdict fails when it grows like ``a**-p`` with
    ``p >= growth_threshold`` as the level shrinks.
    """
    m = prob.manifold
    per_level = []
    for idx, a in enumerate(levels):
        X, _ = _level_points(b, a, samples, seed + idx, box)
        if len(X) == 0:
            per_level.append((float(a), float("nan")))
            continue
        G = m.g(X)
        grad_phi = np.linalg.solve(G, b.differential(X)[..., None])[..., 0]
        s = np.einsum("ni,ni->n", grad_phi, prob.V.differential(X))
        per_level.append((float(a), max(0.0, float(np.max(-s / b.value(X))))))
    vals = np.array([p[1] for p in per_level])
    if np.any(np.isnan(vals)):
        return float("nan"), Verdict(FAIL, float("nan"), "levels without samples"), per_level
    M_prime = float(np.max(vals))
    p = growth_exponent([p[0] for p in per_level], vals)
    if p >= growth_threshold:
        return M_prime, Verdict(FAIL, M_prime, f"M' grows like a^-{p:.2f}"), per_level
    return M_prime, Verdict(PASS, M_prime, "M' bounded across levels; sampled points only"), per_level


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    speed: np.ndarray
    energy_profile: np.ndarray
    ode_residual: float = 0.0
    converged: bool = True
    tag: str = ""
    diagnostics: dict = field(default_factory=dict)

    @property
    def samples(self):
        return list(zip(self.t, self.x, self.v))

    @property
    def energy_spread(self):
        return float(np.ptp(self.energy_profile))

    def to_csv(self, fh=None):
        """CSV with columns ``t, x0..x{n-1}, speed, energy``."""
        own = fh is None
        fh = fh or io.StringIO()
        w = csv.writer(fh, lineterminator="\n")
        n = self.x.shape[1]
        w.writerow(["t"] + [f"x{k}" for k in range(n)] + ["speed", "energy"])
        for row in zip(self.t, self.x, self.speed, self.energy_profile):
            t, x, sp, e = row
            w.writerow([repr(float(t))] + [repr(float(c)) for c in x] + [repr(float(sp)), repr(float(e))])
        return fh.getvalue() if own else None


def _stationary(prob, p, tol):
    Vp = float(prob.V(p))
    if abs(prob.E - Vp) > tol * max(1.0, abs(prob.E)):
        raise EnergyLevelError(f"a stationary trajectory at {p} has energy {Vp:g}, not E = {prob.E:g}")
    if np.linalg.norm(prob.V.differential(p)) > tol:
        raise GeodomError(f"{p} is not an equilibrium of V")
    t = np.array([0.0, 1.0])
    x = np.array([p, p])
    return Trajectory(t, x, np.zeros_like(x), np.zeros(2), np.full(2, Vp))


def trajectory_from_geodesic(prob, geodesic, tol=1e-3):
    """Reparametrize a Jacobi geodesic into a solution with energy ``E``.

    With ``s`` in ``[0, 1]`` and constant Jacobi speed ``c_J``, the time
    change ``dt/ds = c / (E - V)`` with ``c = c_J / sqrt(2)`` gives kinetic
    energy ``E - V``.  ``c_J`` is read off each segment separately.  Node
    velocities and accelerations come from cubic splines; ``ode_residual`` is the largest interior ``|D_t xdot + grad V|_g``
    relative to ``1 + max |grad V|_g``.
    """
    m = prob.manifold
    X = np.asarray(geodesic.nodes, dtype=float)
    prob.check_energy(X)
    jm = jacobi_metric(prob)
    seg = speeds(geodesic, jm)
    c_J = float(np.mean(seg))
    if c_J == 0.0:
        return _stationary(prob, X[0], tol)

    K = geodesic.K
    mid = X[:-1] + 0.5 * m.wrap_delta(np.diff(X, axis=0))
    w_node = prob.E - prob.V(X)
    w_mid = prob.E - prob.V(mid)
    # c is taken per segment: the discrete geodesic's Jacobi speed drifts at O(1/K^2)
    c_seg = seg / np.sqrt(2.0)
    # Simpson on each segment
    dt = c_seg / (6.0 * K) * (1.0 / w_node[:-1] + 4.0 / w_mid + 1.0 / w_node[1:])
    t = np.concatenate([[0.0], np.cumsum(dt)])

    spline = CubicSpline(t, X, axis=0)
    v = spline(t, 1)
    acc = spline(t, 2)
    G = m.g(X)
    kinetic = 0.5 * np.einsum("ni,nij,nj->n", v, G, v)
    Vx = prob.V(X)
    energy = kinetic + Vx

    gradV = np.linalg.solve(G, prob.V.differential(X)[..., None])[..., 0]
    r = acc + np.einsum("nkij,ni,nj->nk", christoffel(m, X), v, v) + gradV
    rn = np.sqrt(np.einsum("ni,nij,nj->n", r, G, r))[2:-2]
    scale = 1.0 + float(np.max(np.sqrt(np.einsum("ni,nij,nj->n", gradV, G, gradV))))
    res = float(np.max(rn) / scale) if len(rn) else 0.0

    spread = float(np.ptp(energy))
    ok = res < tol and spread < tol * max(1.0, abs(prob.E))
    traj = Trajectory(
        t,
        X,
        v,
        np.sqrt(2.0 * kinetic),
        energy,
        ode_residual=res,
        converged=ok,
        tag="" if ok else "reparametrization-failed",
        diagnostics={"c": c_J / np.sqrt(2.0), "jacobi_speed": c_J, "jacobi_speed_spread": float(np.ptp(seg)), "energy_spread": spread},
    )
    return traj


def jacobi_length(prob, path):
    """Length of a discrete path in the Jacobi metric."""
    return float(np.sum(speeds(path, jacobi_metric(prob))) / path.K)


def solve_trajectory(prob, p, q, cfg=None, init=None):
    """Solve the Jacobi geodesic problem and reparametrize the result.

    Returns ``(SolveReport, Trajectory or None)``.
    """
    from .domain import Barrier
    from .solver import solve

    prob.check_energy(np.vstack([p, q]))
    jm = jacobi_metric(prob)
    if prob.barrier is None:
        b = Barrier.whole_chart(jm)
    else:
        b = Barrier(jm, prob.barrier.phi, prob.barrier.level_schedule, name=prob.barrier.name)
    if init is None:
        prob.check_energy(DiscretePath.linear(p, q, 64).nodes)
    report = solve(p, q, b, cfg, init)
    if report.path is None or report.failure_reason == "invalid-seed":
        return report, None
    return report, trajectory_from_geodesic(prob, report.path)


# builtin potentials

def zero_potential(dim=2):
    def value(x):
        return np.zeros(np.shape(x)[:-1])

    def grad(x):
        return np.zeros(np.shape(x))

    def hess(x):
        return np.zeros(np.shape(x) + (np.shape(x)[-1],))

    return ScalarField(value, grad, hess, name="zero")


def harmonic(k=1.0):
    """``V = k/2 |x|^2``."""

    def value(x):
        return 0.5 * k * np.sum(x * x, axis=-1)

    def grad(x):
        return k * np.asarray(x, dtype=float)

    def hess(x):
        n = np.shape(x)[-1]
        return np.broadcast_to(k * np.eye(n), np.shape(x) + (n,)).copy()

    return ScalarField(value, grad, hess, name=f"harmonic({k:g})")


def linear_y(c=1.0):
    """``V = c y`` with ``y`` the second coordinate."""

    def value(x):
        return c * x[..., 1]

    def grad(x):
        out = np.zeros(np.shape(x))
        out[..., 1] = c
        return out

    def hess(x):
        return np.zeros(np.shape(x) + (np.shape(x)[-1],))

    return ScalarField(value, grad, hess, name=f"linear_y({c:g})")


def quadratic_y(c=1.0):
    """``V = c y^2``."""

    def value(x):
        return c * x[..., 1] ** 2

    def grad(x):
        out = np.zeros(np.shape(x))
        out[..., 1] = 2.0 * c * x[..., 1]
        return out

    def hess(x):
        out = np.zeros(np.shape(x) + (np.shape(x)[-1],))
        out[..., 1, 1] = 2.0 * c
        return out

    return ScalarField(value, grad, hess, name=f"quadratic_y({c:g})")
