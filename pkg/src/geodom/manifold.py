"""Coordinate-chart Riemannian manifolds.

A manifold is a single chart with an explicit metric-tensor field.  Every
callable in this module is batch aware: points are arrays of shape ``(n,)`` or
``(..., n)`` and metric callables must return ``(..., n, n)``.

Derivatives of metrics and scalar fields default to central finite differences
with relative step ``1e-5 * max(1, |x|)``.  Analytic derivatives attached to a
:class:`ScalarField` or :class:`ChartManifold` take precedence.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ChartDomainError, EscapeError, IllConditionedMetricError

FD_REL_STEP = 1e-5
# pure second differences lose ~eps/h^2 to roundoff, so they use a wider step
FD2_REL_STEP = 1e-4
SYM_TOL = 1e-12
COND_MAX = 1e12


def fd_step(x, rel=FD_REL_STEP):
    return rel * np.maximum(1.0, np.linalg.norm(x, axis=-1))


def _fd_jacobian(func, x, rel=FD_REL_STEP):
    """Central differences of ``func`` along each chart axis.

    Returns an array whose axis ``x.ndim - 1`` indexes the differentiation
    direction, placed in front of the output's own trailing axes.
    """
    x = np.asarray(x, dtype=float)
    h = fd_step(x, rel)
    cols = []
    for k in range(x.shape[-1]):
        xp = x.copy()
        xm = x.copy()
        xp[..., k] += h
        xm[..., k] -= h
        fp = np.asarray(func(xp), dtype=float)
        fm = np.asarray(func(xm), dtype=float)
        hk = h.reshape(h.shape + (1,) * (fp.ndim - h.ndim))
        cols.append((fp - fm) / (2.0 * hk))
    return np.stack(cols, axis=x.ndim - 1)


@dataclass(frozen=True)
class ScalarField:
    """A smooth function on the chart with optional analytic derivatives.

    ``grad`` returns the chart differential (partial derivatives), not the
    Riemannian gradient; ``hess`` returns the matrix of second partials.
    """

    value: Callable
    grad: Optional[Callable] = None
    hess: Optional[Callable] = None
    name: str = ""

    def __call__(self, x):
        return np.asarray(self.value(np.asarray(x, dtype=float)), dtype=float)

    def differential(self, x):
        x = np.asarray(x, dtype=float)
        if self.grad is not None:
            return np.broadcast_to(np.asarray(self.grad(x), dtype=float), x.shape).copy()
        return _fd_jacobian(self.value, x)

    def second_partials(self, x):
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        if self.hess is not None:
            H = np.asarray(self.hess(x), dtype=float)
            return np.broadcast_to(H, x.shape[:-1] + (n, n)).copy()
        if self.grad is not None:
            H = _fd_jacobian(self.differential, x)
            return 0.5 * (H + np.swapaxes(H, -1, -2))
        return _fd_second_partials(self.value, x)

    def without_derivatives(self):
        return ScalarField(self.value, name=self.name)


def _fd_second_partials(func, x):
    h = fd_step(x, FD2_REL_STEP)
    n = x.shape[-1]
    f0 = np.asarray(func(x), dtype=float)
    H = np.empty(x.shape[:-1] + (n, n))
    h2 = h * h
    for i in range(n):
        xp = x.copy()
        xm = x.copy()
        xp[..., i] += h
        xm[..., i] -= h
        H[..., i, i] = (func(xp) - 2.0 * f0 + func(xm)) / h2
        for j in range(i + 1, n):
            xpp = xp.copy()
            xpm = xp.copy()
            xmp = xm.copy()
            xmm = xm.copy()
            xpp[..., j] += h
            xpm[..., j] -= h
            xmp[..., j] += h
            xmm[..., j] -= h
            Hij = (func(xpp) - func(xpm) - func(xmp) + func(xmm)) / (4.0 * h2)
            H[..., i, j] = Hij
            H[..., j, i] = Hij
    return H


def constant_field(c=1.0):
    def value(x):
        return np.full(np.shape(x)[:-1], float(c))

    def grad(x):
        return np.zeros(np.shape(x))

    def hess(x):
        n = np.shape(x)[-1]
        return np.zeros(np.shape(x)[:-1] + (n, n))

    return ScalarField(value, grad, hess, name=f"constant({c})")


@dataclass(frozen=True)
class ChartManifold:
    """n-dimensional Riemannian manifold given in a single chart.

    Parameters
    ----------
    dim : int
        Chart dimension.
    metric : callable
        Maps points ``(..., n)`` to symmetric positive definite ``(..., n, n)``.
    metric_deriv : callable, optional
        Analytic metric derivative, ``out[..., l, i, j] = d_l g_ij``.
    periodic_axes : tuple of (axis, period)
        Angular coordinates; differences along them use the shortest
        representative.
    chart_domain : callable, optional
        Boolean predicate marking where the chart is valid.
    """

    dim: int
    metric: Callable
    metric_deriv: Optional[Callable] = None
    periodic_axes: tuple = ()
    chart_domain: Optional[Callable] = None
    name: str = ""
    domain_error: type = ChartDomainError

    def in_chart(self, x):
        x = np.asarray(x, dtype=float)
        ok = np.all(np.isfinite(x), axis=-1)
        if self.chart_domain is not None:
            ok = ok & np.asarray(self.chart_domain(x), dtype=bool)
        return ok

    def require_chart(self, x):
        ok = self.in_chart(x)
        if not np.all(ok):
            bad = np.asarray(x)[~ok] if np.ndim(ok) else np.asarray(x)
            raise self.domain_error(f"point outside chart domain of {self.name or 'manifold'}: {bad.reshape(-1, self.dim)[0]}")

    def g(self, x, check=True):
        x = np.asarray(x, dtype=float)
        if check:
            self.require_chart(x)
        G = np.asarray(self.metric(x), dtype=float)
        G = np.broadcast_to(G, x.shape[:-1] + (self.dim, self.dim))
        if check:
            _validate_metric(G)
        return G

    def dg(self, x):
        x = np.asarray(x, dtype=float)
        if self.metric_deriv is not None:
            D = np.asarray(self.metric_deriv(x), dtype=float)
            return np.broadcast_to(D, x.shape[:-1] + (self.dim,) * 3).copy()
        return _fd_jacobian(lambda y: self.g(y, check=False), x)

    def g_inv(self, x, check=True):
        return np.linalg.inv(self.g(x, check))

    def wrap_delta(self, d):
        d = np.array(d, dtype=float, copy=True)
        for axis, period in self.periodic_axes:
            d[..., axis] -= period * np.round(d[..., axis] / period)
        return d

    def wrap(self, x):
        x = np.array(x, dtype=float, copy=True)
        for axis, period in self.periodic_axes:
            x[..., axis] = np.mod(x[..., axis], period)
        return x


def _validate_metric(G):
    scale = np.maximum(1.0, np.max(np.abs(G), axis=(-1, -2)))
    asym = np.max(np.abs(G - np.swapaxes(G, -1, -2)), axis=(-1, -2))
    if np.any(asym > SYM_TOL * scale):
        raise IllConditionedMetricError(f"metric not symmetric (defect {np.max(asym):.3e})")
    ev = np.linalg.eigvalsh(G)
    lo = ev[..., 0]
    hi = ev[..., -1]
    if np.any(~np.isfinite(ev)) or np.any(lo <= 0.0):
        raise IllConditionedMetricError("metric not positive definite")
    if np.any(hi > COND_MAX * lo):
        raise IllConditionedMetricError(f"metric condition number exceeds {COND_MAX:.0e}")


@dataclass(frozen=True)
class TangentVector:
    base: np.ndarray
    comps: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float))
        object.__setattr__(self, "comps", np.asarray(self.comps, dtype=float))


def inner(m, u, v):
    """Metric inner product of two tangent vectors at the same base point."""
    if not np.array_equal(u.base, v.base):
        raise ValueError("tangent vectors have different base points")
    G = m.g(u.base)
    return float(u.comps @ G @ v.comps)


def norm_sq(m, x, v):
    G = m.g(x)
    return np.einsum("...i,...ij,...j->...", v, G, v)


def christoffel(m, x):
    """Levi-Civita symbols ``out[..., k, i, j]`` at ``x``."""
    x = np.asarray(x, dtype=float)
    ginv = m.g_inv(x)
    A = m.dg(x)
    T = A + np.swapaxes(A, -3, -2) - np.moveaxis(A, -3, -1)
    return 0.5 * np.einsum("...kl,...ijl->...kij", ginv, T)


def geodesic_acceleration(m, x, v):
    return -np.einsum("...kij,...i,...j->...k", christoffel(m, x), v, v)


@dataclass(frozen=True)
class GeodesicSample:
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray


def geodesic_shoot(m, x0, v0, T, steps):
    """Integrate the geodesic equation with fixed-step RK4.

    Raises :class:`EscapeError` carrying the last valid ``(t, x, v)`` when the
    trajectory leaves the chart domain.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x = np.asarray(x0, dtype=float).copy()
    v = np.asarray(v0, dtype=float).copy()
    m.require_chart(x)
    h = float(T) / steps
    xs = [x.copy()]
    vs = [v.copy()]

    def rhs(xx, vv):
        if not m.in_chart(xx):
            raise ChartDomainError("stage point outside chart")
        return vv, geodesic_acceleration(m, xx, vv)

    for i in range(steps):
        try:
            k1x, k1v = rhs(x, v)
            k2x, k2v = rhs(x + 0.5 * h * k1x, v + 0.5 * h * k1v)
            k3x, k3v = rhs(x + 0.5 * h * k2x, v + 0.5 * h * k2v)
            k4x, k4v = rhs(x + h * k3x, v + h * k3v)
        except ChartDomainError as exc:
            raise EscapeError(f"geodesic left the chart domain after t={i * h:g}", (i * h, x, v)) from exc
        xn = x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        vn = v + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        if not m.in_chart(xn):
            raise EscapeError(f"geodesic left the chart domain after t={i * h:g}", (i * h, x, v))
        x, v = xn, vn
        xs.append(x.copy())
        vs.append(v.copy())
    t = np.linspace(0.0, float(T), steps + 1)
    return GeodesicSample(t, np.array(xs), np.array(vs))


def gradient_comps(m, field, x):
    """Batch Riemannian gradient components ``g^{-1} dfield``."""
    df = field.differential(x)
    return np.linalg.solve(m.g(x), df[..., None])[..., 0]


def riem_grad(m, field, x):
    x = np.asarray(x, dtype=float)
    return TangentVector(x, gradient_comps(m, field, x))


def cov_hessian(m, field, x):
    """Covariant Hessian ``d^2 f - Gamma^k df_k`` as a symmetric matrix."""
    x = np.asarray(x, dtype=float)
    m.require_chart(x)
    d2 = field.second_partials(x)
    df = field.differential(x)
    H = d2 - np.einsum("...kij,...k->...ij", christoffel(m, x), df)
    return 0.5 * (H + np.swapaxes(H, -1, -2))


# builtin gallery metrics

def euclidean(dim=2):
    eye = np.eye(dim)

    def metric(x):
        return np.broadcast_to(eye, np.shape(x)[:-1] + (dim, dim))

    def deriv(x):
        return np.zeros(np.shape(x)[:-1] + (dim, dim, dim))

    return ChartManifold(dim, metric, deriv, name="euclidean")


def polar_inverse_r2():
    """``dr^2 + r^-2 dtheta^2`` on ``r > 0`` with periodic angle."""

    def metric(x):
        r = x[..., 0]
        G = np.zeros(np.shape(x)[:-1] + (2, 2))
        G[..., 0, 0] = 1.0
        G[..., 1, 1] = 1.0 / (r * r)
        return G

    def deriv(x):
        r = x[..., 0]
        D = np.zeros(np.shape(x)[:-1] + (2, 2, 2))
        D[..., 0, 1, 1] = -2.0 / r**3
        return D

    def chart(x):
        return x[..., 0] > 0.0

    return ChartManifold(2, metric, deriv, ((1, 2 * np.pi),), chart, name="polar_inverse_r2")


def flat_cylinder(period=2 * np.pi):
    """Flat cylinder in chart ``(theta, z)`` with ``theta`` periodic."""
    m = euclidean(2)
    return ChartManifold(2, m.metric, m.metric_deriv, ((0, float(period)),), None, name="flat_cylinder")
