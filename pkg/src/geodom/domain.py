"""Open domains ``D = {phi > 0}``, the normalized gradient flow and level projection."""

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import (
    BoundaryReachError,
    DegenerateGradientError,
    UnusableRegionError,
    WrongSideError,
)
from .manifold import ChartManifold, ScalarField, constant_field, fd_step

GRAD_FLOOR = 1e-8
DEFAULT_FLOW_STEPS = 200


def geometric_levels(a0=0.5, count=8, ratio=0.5):
    return tuple(float(a0) * ratio**m for m in range(count))


@dataclass(frozen=True)
class Box:
    """Axis-aligned sampling box in chart coordinates."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != len(hi) or any(a >= b for a, b in zip(lo, hi)):
            raise ValueError(f"invalid box {lo} .. {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return len(self.lo)

    def sample(self, rng, n):
        return rng.uniform(self.lo, self.hi, size=(n, self.dim))

    def contains(self, x):
        x = np.asarray(x)
        return np.all((x >= self.lo) & (x <= self.hi), axis=-1)


@dataclass(frozen=True)
class Barrier:
    """Barrier function ``phi`` on a chart; the domain is where ``phi > 0``."""

    manifold: ChartManifold
    phi: ScalarField
    level_schedule: tuple = field(default_factory=geometric_levels)
    name: str = ""

    def __post_init__(self):
        levels = tuple(float(a) for a in self.level_schedule)
        if not levels:
            raise ValueError("level_schedule must be non-empty")
        if any(a <= 0 for a in levels) or any(b >= a for a, b in zip(levels, levels[1:])):
            raise ValueError("level_schedule must be positive and strictly decreasing")
        object.__setattr__(self, "level_schedule", levels)

    @classmethod
    def whole_chart(cls, m):
        """Trivial barrier ``phi = 1``: the domain is the full chart."""
        return cls(m, constant_field(1.0), (1.0,), name="whole_chart")

    def value(self, x):
        return self.phi(x)

    def differential(self, x):
        return self.phi.differential(x)

    def grad(self, x):
        df = self.phi.differential(x)
        return np.linalg.solve(self.manifold.g(x), df[..., None])[..., 0]

    def grad_norm(self, x):
        x = np.asarray(x, dtype=float)
        df = self.phi.differential(x)
        Ginv = np.linalg.inv(self.manifold.g(x))
        return np.sqrt(np.einsum("...i,...ij,...j->...", df, Ginv, df))

    def inside(self, x):
        x = np.asarray(x, dtype=float)
        ok = self.manifold.in_chart(x)
        with np.errstate(invalid="ignore", divide="ignore"):
            val = self.phi(x)
        return ok & (val > 0.0)


class FlowState(NamedTuple):
    time: float
    point: np.ndarray


def _normalized_field(b, X):
    """Velocity ``-grad phi / |grad phi|^2`` and gradient norms for a batch."""
    df = b.phi.differential(X)
    G = b.manifold.metric(X)
    gr = np.linalg.solve(G, df[..., None])[..., 0]
    nsq = np.einsum("...i,...i->...", df, gr)
    with np.errstate(divide="ignore", invalid="ignore"):
        vel = -gr / nsq[..., None]
    return vel, np.sqrt(np.maximum(nsq, 0.0))


def _flow_batch(b, X, S, steps):
    """RK4 flow of a batch; returns ``(Y, ok)`` and never raises for single failures.

    Steps follow a cosine-graded mesh in ``[0, S]``, fine at both ends, where
    the field is stiff near critical points of ``phi`` or a degenerate
    boundary.  The mesh is the same for every point, so ``Y`` stays smooth in
    ``X`` for finite differencing.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    S = np.broadcast_to(np.asarray(S, dtype=float), X.shape[:1]).copy()
    tau = 0.5 * (1.0 - np.cos(np.pi * np.arange(steps + 1) / steps))
    ok = np.ones(len(X), dtype=bool)
    m = b.manifold

    def rhs(Y):
        nonlocal ok
        inchart = m.in_chart(Y)
        Ysafe = np.where(inchart[:, None], Y, X)
        vel, gn = _normalized_field(b, Ysafe)
        good = inchart & np.isfinite(gn) & (gn >= GRAD_FLOOR) & np.all(np.isfinite(vel), axis=-1)
        ok &= good
        return np.where(good[:, None], vel, 0.0)

    Y = X.copy()
    for dt in np.diff(tau):
        h = (S * dt)[:, None]
        k1 = rhs(Y)
        k2 = rhs(Y + 0.5 * h * k1)
        k3 = rhs(Y + 0.5 * h * k2)
        k4 = rhs(Y + h * k3)
        Y = Y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    ok &= m.in_chart(Y) & np.all(np.isfinite(Y), axis=-1)
    return Y, ok


def flow(b, x, s, steps=DEFAULT_FLOW_STEPS):
    """Normalized gradient flow ``eta(s, x)``; decreases ``phi`` at unit rate.

    ``x`` may be a single point or a batch ``(N, n)`` with scalar or per-point
    ``s``.  Negative times move away from the boundary.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    S = np.broadcast_to(np.asarray(s, dtype=float), X.shape[:1])
    if np.all(S == 0.0):
        return x.copy()
    phi0 = b.value(X)
    if np.any(~b.inside(X)):
        raise BoundaryReachError("flow start point is not inside the domain")
    if np.any(S >= phi0):
        raise BoundaryReachError(f"flow time {np.max(S):g} reaches the boundary (phi = {phi0[np.argmax(S - phi0)]:g})")
    Y, ok = _flow_batch(b, X, S, steps)
    if not np.all(ok):
        raise DegenerateGradientError(f"|grad phi| fell below {GRAD_FLOOR:g} along the flow")
    return Y[0] if single else Y


def _to_level_batch(b, X, a, steps, polish=3):
    """Flow each point to level ``a`` (either direction); returns ``(Y, ok)``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    a = np.broadcast_to(np.asarray(a, dtype=float), X.shape[:1])
    S = b.value(X) - a
    Y, ok = _flow_batch(b, X, S, steps)
    # residual defect is removed by flowing for the (tiny) remaining time
    for _ in range(polish):
        if not np.any(ok):
            break
        Ysafe = np.where(ok[:, None], Y, X)
        vel, gn = _normalized_field(b, Ysafe)
        good = ok & (gn >= GRAD_FLOOR) & np.all(np.isfinite(vel), axis=-1)
        defect = b.value(Ysafe) - a
        Y = np.where(good[:, None], Ysafe + defect[:, None] * vel, Y)
        ok = good & b.manifold.in_chart(Y)
    return Y, ok


def project_to_level(b, x, a, steps=DEFAULT_FLOW_STEPS):
    """Project onto the level set ``phi = a`` along the normalized flow."""
    if a <= 0:
        raise ValueError("target level must be positive")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    phi0 = b.value(X)
    if np.any(a > phi0 + 1e-14 * np.maximum(1.0, a)):
        raise WrongSideError(f"level {a:g} lies above phi(x) = {np.min(phi0):g}")
    if np.all(phi0 - a <= 1e-14 * max(1.0, a)):
        return x.copy()
    Y, ok = _to_level_batch(b, X, a, steps)
    if not np.all(ok):
        raise DegenerateGradientError("projection flow met a degenerate gradient")
    Y = np.where((phi0 - a <= 1e-14 * max(1.0, a))[:, None], X, Y)
    return Y[0] if single else Y


class FlowBounds(NamedTuple):
    C1: float
    C2: float
    C1_metric: float
    C2_metric: float
    n_used: int
    n_failed: int


def _second_directions(n, rng, extra=2):
    dirs = list(np.eye(n))
    for i in range(n):
        for j in range(i + 1, n):
            d = np.zeros(n)
            d[i] = d[j] = 1.0 / np.sqrt(2.0)
            dirs.append(d)
    for _ in range(extra):
        d = rng.normal(size=n)
        dirs.append(d / np.linalg.norm(d))
    return np.array(dirs)


def flow_derivative_bounds(b, region, s_max, n_samples, seed, a_floor=None, steps=64):
    """Sampled bounds on the first and second derivatives of the normalized flow.

    Chart-coordinate operator norms are returned as ``C1, C2``; the same
    quantities measured with the metric at the start and end points are
    ``C1_metric, C2_metric``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if a_floor is None:
        a_floor = b.level_schedule[-1]
    rng = np.random.default_rng(seed)
    m = b.manifold
    n = m.dim

    X = np.empty((0, n))
    for _ in range(50):
        cand = region.sample(rng, 4 * n_samples)
        inside = b.inside(cand)
        cand = cand[inside]
        cand = cand[b.value(cand) > a_floor]
        X = np.vstack([X, cand])
        if len(X) >= n_samples:
            break
    if len(X) == 0:
        raise UnusableRegionError("no sample points above the floor level in the region")
    X = X[:n_samples]
    N = len(X)
    # half the samples flow all the way down to the floor, where the sup usually sits
    u = rng.uniform(0.0, 1.0, size=N)
    u[: (N + 1) // 2] = 1.0
    S = u * np.minimum(s_max, b.value(X) - a_floor)
    dirs = _second_directions(n, rng)

    h1 = fd_step(X)
    h2 = fd_step(X, 1e-4)
    Y0, ok = _flow_batch(b, X, S, steps)
    J = np.empty((N, n, n))
    for k in range(n):
        dx = np.zeros(n)
        dx[k] = 1.0
        Yp, okp = _flow_batch(b, X + h1[:, None] * dx, S, steps)
        Ym, okm = _flow_batch(b, X - h1[:, None] * dx, S, steps)
        ok &= okp & okm
        J[:, :, k] = (Yp - Ym) / (2.0 * h1[:, None])
    D2 = np.empty((N, len(dirs), n))
    for d_i, d in enumerate(dirs):
        Yp, okp = _flow_batch(b, X + h2[:, None] * d, S, steps)
        Ym, okm = _flow_batch(b, X - h2[:, None] * d, S, steps)
        ok &= okp & okm
        D2[:, d_i, :] = (Yp - 2.0 * Y0 + Ym) / (h2[:, None] ** 2)

    n_fail = int(np.count_nonzero(~ok))
    if n_fail > 0.5 * N:
        raise UnusableRegionError(f"{n_fail} of {N} flow samples failed")
    J, D2, X, Y0 = J[ok], D2[ok], X[ok], Y0[ok]

    C1 = float(np.max(np.linalg.norm(J, ord=2, axis=(1, 2))))
    C2 = float(np.max(np.linalg.norm(D2, axis=-1)))

    Gx = m.g(X)
    Gy = m.g(Y0)
    L = np.linalg.cholesky(Gx)
    Linv = np.linalg.inv(L)
    A = np.einsum("nij,njk->nik", Linv, np.einsum("nji,njk,nkl->nil", J, Gy, J))
    A = np.einsum("nij,nkj->nik", A, Linv)
    C1m = float(np.sqrt(np.max(np.linalg.eigvalsh(0.5 * (A + np.swapaxes(A, 1, 2)))[:, -1])))
    vnorm2 = np.einsum("di,nij,dj->nd", dirs, Gx, dirs)
    wnorm = np.sqrt(np.einsum("ndi,nij,ndj->nd", D2, Gy, D2))
    C2m = float(np.max(wnorm / vnorm2))
    return FlowBounds(C1, C2, C1m, C2m, len(X), n_fail)


# builtin gallery barriers

def sqrt_xy():
    def value(x):
        with np.errstate(invalid="ignore"):
            return np.sqrt(x[..., 0] * x[..., 1])

    def grad(x):
        p = value(x)
        return np.stack([x[..., 1] / (2 * p), x[..., 0] / (2 * p)], axis=-1)

    def hess(x):
        X, Y = x[..., 0], x[..., 1]
        p = value(x)
        H = np.empty(np.shape(x)[:-1] + (2, 2))
        H[..., 0, 0] = -Y * Y / (4 * p**3)
        H[..., 1, 1] = -X * X / (4 * p**3)
        H[..., 0, 1] = H[..., 1, 0] = 1.0 / (4 * p)
        return H

    return ScalarField(value, grad, hess, name="sqrt_xy")


def xy():
    def value(x):
        return x[..., 0] * x[..., 1]

    def grad(x):
        return np.stack([x[..., 1], x[..., 0]], axis=-1)

    def hess(x):
        H = np.zeros(np.shape(x)[:-1] + (2, 2))
        H[..., 0, 1] = H[..., 1, 0] = 1.0
        return H

    return ScalarField(value, grad, hess, name="xy")


def coordinate(axis, name=None):
    """Linear barrier ``phi = x[axis]`` (``radial_r`` in polar charts, ``half_plane_y``)."""

    def value(x):
        return x[..., axis] * 1.0

    def grad(x):
        d = np.zeros(np.shape(x))
        d[..., axis] = 1.0
        return d

    def hess(x):
        n = np.shape(x)[-1]
        return np.zeros(np.shape(x)[:-1] + (n, n))

    return ScalarField(value, grad, hess, name=name or f"coordinate({axis})")


def radial_r():
    return coordinate(0, "radial_r")


def half_plane_y():
    return coordinate(1, "half_plane_y")


def unit_disk():
    def value(x):
        return 1.0 - np.sum(x * x, axis=-1)

    def grad(x):
        return -2.0 * x

    def hess(x):
        n = np.shape(x)[-1]
        return np.broadcast_to(-2.0 * np.eye(n), np.shape(x)[:-1] + (n, n)).copy()

    return ScalarField(value, grad, hess, name="unit_disk")


def sine_half_plane(amp=0.5):
    """Non-convex barrier ``y + amp*sin(x)``."""

    def value(x):
        return x[..., 1] + amp * np.sin(x[..., 0])

    def grad(x):
        return np.stack([amp * np.cos(x[..., 0]), np.ones(np.shape(x)[:-1])], axis=-1)

    def hess(x):
        H = np.zeros(np.shape(x)[:-1] + (2, 2))
        H[..., 0, 0] = -amp * np.sin(x[..., 0])
        return H

    return ScalarField(value, grad, hess, name=f"sine_half_plane({amp})")


def _helix_cap(t):
    # C^2 saturation: p(0)=0, p'(0)=1, p'(1)=p''(1)=0, constant 2/5 beyond t=1
    t = np.minimum(t, 1.0)
    u = 1.0 - t
    return 0.4 - u**4 + 0.6 * u**5


def _helix_cap_d1(t):
    t = np.minimum(t, 1.0)
    u = 1.0 - t
    return u**3 * (1.0 + 3.0 * t)


def _helix_cap_d2(t):
    t = np.minimum(t, 1.0)
    return -12.0 * t * (1.0 - t) ** 2


def dist_to_helix(pitch=1.0, width=0.3, period=2 * np.pi):
    """Capped distance to the helix ``z = c*theta`` on the flat cylinder chart.

    ``pitch`` is the rise per turn, so ``c = pitch / period``.  The distance is
    taken to the nearest periodic representative of the helix line and is
    saturated smoothly (C^2) at ``width``; the maximum value is ``0.4*width``.
    """
    c = pitch / period
    norm = np.hypot(1.0, c)
    normal = np.array([-c, 1.0]) / norm

    def signed(x):
        off = x[..., 1] - c * x[..., 0]
        k = np.round(off / pitch)
        return (off - k * pitch) / norm

    def value(x):
        d = np.abs(signed(x))
        return width * _helix_cap(d / width)

    def grad(x):
        sd = signed(x)
        d = np.abs(sd)
        scale = _helix_cap_d1(d / width) * np.sign(sd)
        return scale[..., None] * normal

    def hess(x):
        d = np.abs(signed(x))
        scale = _helix_cap_d2(d / width) / width
        return scale[..., None, None] * np.outer(normal, normal)

    return ScalarField(value, grad, hess, name=f"dist_to_helix({pitch},{width})")
