"""Discrete fixed-endpoint path space: energy, penalty, gradients, diagnostics.

Scheme: segment energy uses the metric at segment midpoints, the penalty uses
node quadrature ``(eps/K) * sum_i phi(x_i)^-2`` over all ``K+1`` nodes.  Nodes
are stored lifted (periodic coordinates are not reduced), so winding around a
periodic axis is carried by the last node.
"""

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .errors import BoundaryViolationError
from .manifold import ChartManifold


@dataclass(frozen=True)
class DiscretePath:
    """Polyline ``x_0 .. x_K`` on the uniform grid ``s_i = i/K``."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float, copy=True)
        if nodes.ndim != 2 or len(nodes) < 3:
            raise ValueError("a path needs at least 3 nodes (K >= 2)")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def K(self):
        return len(self.nodes) - 1

    @property
    def dim(self):
        return self.nodes.shape[1]

    @property
    def endpoints(self):
        return self.nodes[0], self.nodes[-1]

    @property
    def s(self):
        return np.linspace(0.0, 1.0, self.K + 1)

    def interior(self):
        return self.nodes[1:-1]

    def with_interior(self, interior):
        nodes = np.vstack([self.nodes[:1], interior, self.nodes[-1:]])
        return DiscretePath(nodes)

    def reversed(self):
        return DiscretePath(self.nodes[::-1])

    def winding(self, m):
        """Sheet offset of the last node relative to the first, per periodic axis."""
        out = {}
        for axis, period in m.periodic_axes:
            a, b = self.nodes[0, axis], self.nodes[-1, axis]
            out[axis] = int(np.floor(b / period) - np.floor(a / period))
        return out

    @classmethod
    def linear(cls, p, q, K):
        t = np.linspace(0.0, 1.0, K + 1)[:, None]
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        nodes = (1.0 - t) * p + t * q
        nodes[0] = p
        nodes[-1] = q
        return cls(nodes)

    @classmethod
    def from_samples(cls, x, K):
        """Resample a densely sampled curve at ``K+1`` equally spaced parameters."""
        x = np.asarray(x, dtype=float)
        src = np.linspace(0.0, 1.0, len(x))
        dst = np.linspace(0.0, 1.0, K + 1)
        nodes = np.column_stack([np.interp(dst, src, x[:, k]) for k in range(x.shape[1])])
        nodes[0] = x[0]
        nodes[-1] = x[-1]
        return cls(nodes)


@dataclass(frozen=True)
class PathEval:
    f: float
    penalty: float
    grad: np.ndarray
    E_profile: np.ndarray
    lambda_profile: np.ndarray

    @property
    def f_eps(self):
        return self.f + self.penalty


def _segments(path, m):
    D = m.wrap_delta(np.diff(path.nodes, axis=0))
    mid = path.nodes[:-1] + 0.5 * D
    return D, mid


def energy(path, m):
    """Discrete action ``(K/2) sum_i <dx_i, dx_i>_{g(mid_i)}``."""
    m.require_chart(path.nodes)
    D, mid = _segments(path, m)
    G = m.g(mid)
    return 0.5 * path.K * float(np.einsum("ki,kij,kj->", D, G, D))


def _check_inside(path, b):
    m = b.manifold
    ok = m.in_chart(path.nodes)
    with np.errstate(invalid="ignore", divide="ignore"):
        phi = b.value(path.nodes)
    bad = np.flatnonzero(~ok | ~(phi > 0.0))
    if len(bad):
        i = int(bad[0])
        raise BoundaryViolationError(f"node {i} at {path.nodes[i]} is outside the domain (phi = {phi[i]:g})", node=i)
    return phi


def _energy_parts(path, m):
    K = path.K
    D, mid = _segments(path, m)
    G = m.g(mid)
    dG = m.dg(mid)
    GD = np.einsum("kij,kj->ki", G, D)
    quad = np.einsum("klij,ki,kj->kl", dG, D, D)
    seg = 0.5 * K * np.einsum("ki,ki->k", D, GD)
    # d e_i / d x_{i+1} and d e_i / d x_i
    d_right = K * GD + 0.25 * K * quad
    d_left = -K * GD + 0.25 * K * quad
    grad = d_right[:-1] + d_left[1:]
    return seg, grad


def penalized_energy(path, b, eps):
    """Discrete ``f_eps = f + (eps/K) sum phi^-2`` with its exact interior gradient."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    m = b.manifold
    K = path.K
    phi = _check_inside(path, b)
    seg, grad = _energy_parts(path, m)
    f = float(np.sum(seg))
    inv2 = phi**-2
    penalty = eps / K * float(np.sum(inv2))
    if eps > 0.0:
        dphi = b.differential(path.nodes[1:-1])
        grad = grad - (2.0 * eps / K) * (phi[1:-1] ** -3)[:, None] * dphi
    E_profile = K * seg - eps * 0.5 * (inv2[:-1] + inv2[1:])
    lam = 2.0 * eps * phi**-3
    return PathEval(f, penalty, grad, E_profile, lam)


def residual_profile(path, b, eps, ev=None):
    """Pointwise g-norm of ``D_s xdot + lambda grad phi`` at interior nodes."""
    if ev is None:
        ev = penalized_energy(path, b, eps)
    X = path.nodes[1:-1]
    G = b.manifold.g(X)
    r = -path.K * np.linalg.solve(G, ev.grad[..., None])[..., 0]
    return np.sqrt(np.einsum("ki,kij,kj->k", r, G, r))


def el_residual(path, b, eps):
    """Max Euler-Lagrange residual of ``D_s xdot + (2 eps/phi^3) grad phi = 0``."""
    if path.K < 4:
        raise ValueError("el_residual needs K >= 4")
    return float(np.max(residual_profile(path, b, eps)))


def speeds(path, m):
    """Segment speeds ``|xdot|_g`` with ``xdot = K dx``."""
    D, mid = _segments(path, m)
    G = m.g(mid)
    return path.K * np.sqrt(np.einsum("ki,kij,kj->k", D, G, D))


def length(path, m):
    return float(np.sum(speeds(path, m)) / path.K)


def node_speeds(path, m):
    v = speeds(path, m)
    out = np.empty(path.K + 1)
    out[0] = v[0]
    out[-1] = v[-1]
    out[1:-1] = 0.5 * (v[:-1] + v[1:])
    return out


def max_dip_ratio(path, b, subdivisions=4):
    """Smallest ratio of barrier value between nodes to the endpoint minimum.

    Detects segments that hop across the boundary between two nodes, which the
    node quadrature cannot see.
    """
    D, _ = _segments(path, b.manifold)
    t = np.linspace(0.0, 1.0, subdivisions + 1)[1:-1]
    pts = path.nodes[:-1, None, :] + t[None, :, None] * D[:, None, :]
    with np.errstate(invalid="ignore"):
        inner = b.value(pts)
        ends = b.value(path.nodes)
    inner = np.where(b.manifold.in_chart(pts), inner, -np.inf)
    base = np.minimum(ends[:-1], ends[1:])
    return float(np.min(np.min(inner, axis=1) / base))


def path_to_csv(path, b, fh=None):
    """CSV with columns ``s, x0..x{n-1}, phi, speed_g``."""
    m = b.manifold
    own = fh is None
    fh = fh or io.StringIO()
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["s"] + [f"x{k}" for k in range(path.dim)] + ["phi", "speed_g"])
    phi = b.value(path.nodes)
    v = node_speeds(path, m)
    for s, x, p, sp in zip(path.s, path.nodes, phi, v):
        w.writerow([repr(float(s))] + [repr(float(c)) for c in x] + [repr(float(p)), repr(float(sp))])
    return fh.getvalue() if own else None


def path_to_dict(path, m, diagnostics=None):
    return {
        "nodes": path.nodes.tolist(),
        "winding": {str(k): v for k, v in path.winding(m).items()},
        "diagnostics": diagnostics or {},
    }


def path_from_dict(d):
    return DiscretePath(np.asarray(d["nodes"], dtype=float))


def path_to_json(path, m, diagnostics=None):
    return json.dumps(path_to_dict(path, m, diagnostics), sort_keys=True)
