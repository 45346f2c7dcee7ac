"""Penalized minimization over discrete path space and epsilon continuation.

The inner loop is a first-order descent preconditioned by the discrete H^1
path-space metric ``<v, w> = K sum_i dv_i^T g(mid_i) dw_i``, with
Barzilai-Borwein step initialization and Armijo backtracking.  Steps that put a
node on or outside the boundary, or that make a segment hop across it, are
rejected during backtracking.
"""

import csv
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import solveh_banded

from . import pathspace as ps
from .domain import _to_level_batch
from .errors import BoundaryViolationError, GeodomError

log = logging.getLogger(__name__)

ARMIJO_C1 = 1e-4
ROUNDOFF = 64 * np.finfo(float).eps
DIP_FLOOR = 0.25


@dataclass(frozen=True)
class SolverConfig:
    eps0: float = 0.5
    eps_ratio: float = 0.5
    eps_min: float = 1e-8
    grad_tol: float = 1e-8
    max_inner_iters: int = 2000
    max_outer_stages: int = 60
    K: int = 200
    seed: int = 0
    beta_floor: float = 0.01
    collapse_stages: int = 5
    collapse_ratio: float = 0.9
    init_level: Optional[float] = None
    polish: bool = True

    def __post_init__(self):
        if not 0.0 < self.eps0 <= 1.0:
            raise ValueError("eps0 must lie in (0, 1]")
        if not 0.0 < self.eps_ratio < 1.0:
            raise ValueError("eps_ratio must lie in (0, 1)")
        for name in ("eps_min", "grad_tol", "beta_floor", "collapse_ratio"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.K < 4:
            raise ValueError("K must be >= 4")


@dataclass(frozen=True)
class StageResult:
    path: ps.DiscretePath
    converged: bool
    iterations: int
    residual_rms: float
    f_eps: float
    reason: str = ""


@dataclass(frozen=True)
class StageRecord:
    eps: float
    f_eps: float
    f: float
    min_phi: float
    el_residual: float
    E_spread: float
    max_lambda: float
    max_speed_sq: float
    speed_bound: float
    iterations: int
    converged: bool


@dataclass
class SolveReport:
    path: ps.DiscretePath
    f_value: float
    history: list
    beta: float
    converged: bool
    failure_reason: Optional[str] = None
    geodesic_residual: float = float("nan")
    winding: dict = field(default_factory=dict)
    seed_class: object = None

    @property
    def exit_status(self):
        if self.converged:
            return 0
        if self.failure_reason == "boundary-collapse":
            return 3
        return 2

    def to_dict(self, m=None):
        return {
            "converged": self.converged,
            "failure_reason": self.failure_reason,
            "f_value": self.f_value,
            "beta": self.beta,
            "geodesic_residual": self.geodesic_residual,
            "winding": {str(k): v for k, v in self.winding.items()},
            "seed_class": self.seed_class,
            "history": [asdict(h) for h in self.history],
            "nodes": self.path.nodes.tolist(),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1, default=_json_default)

    def history_csv(self):
        buf = io.StringIO()
        cols = list(StageRecord.__dataclass_fields__)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["stage"] + cols)
        for i, h in enumerate(self.history):
            w.writerow([i] + [repr(getattr(h, c)) if isinstance(getattr(h, c), float) else getattr(h, c) for c in cols])
        return buf.getvalue()


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _h1_banded(path, m):
    """Upper banded form of the discrete H^1 metric on interior nodes."""
    K, n = path.K, path.dim
    D, mid = ps._segments(path, m)
    G = K * m.g(mid)
    N = (K - 1) * n
    u = 2 * n - 1
    ab = np.zeros((u + 1, N))
    diag = G[:-1] + G[1:]
    off = -G[1:-1]
    for a in range(n):
        for bb in range(a, n):
            ab[u + a - bb, np.arange(K - 1) * n + bb] = diag[:, a, bb]
        for bb in range(n):
            ab[u + a - bb - n, np.arange(1, K - 1) * n + bb] = off[:, a, bb]
    return ab


def _residual_rms(path, b, ev):
    r = ps.residual_profile(path, b, 0.0, ev)
    return float(np.sqrt(np.mean(r * r)))


def _evaluate(path, b, eps):
    try:
        ev = ps.penalized_energy(path, b, eps)
    except (BoundaryViolationError, GeodomError):
        return None
    if not np.isfinite(ev.f_eps):
        return None
    return ev


def minimize_stage(path0, b, eps, cfg, min_phi_guard=0.0):
    """Find a critical point of ``f_eps`` starting from ``path0``."""
    m = b.manifold
    path = path0
    ev = _evaluate(path, b, eps)
    if ev is None:
        raise BoundaryViolationError("initial stage path is not inside the domain")
    res = _residual_rms(path, b, ev)
    if res < cfg.grad_tol:
        return StageResult(path, True, 0, res, ev.f_eps)
    check_dips = b.name != "whole_chart"
    dip_ref = min(DIP_FLOOR, ps.max_dip_ratio(path, b)) if check_dips else 0.0
    n = path.dim
    K = path.K
    alpha = 1.0
    prev = None
    reason = "iteration cap"
    it = 0
    for it in range(1, cfg.max_inner_iters + 1):
        ab = _h1_banded(path, m)
        flat_g = ev.grad.reshape(-1)
        d = -solveh_banded(ab, flat_g)
        slope = float(flat_g @ d)
        if prev is not None:
            s, y = prev
            sy = float(s @ y)
            if sy > 0:
                sLs = float(s @ _banded_matvec(ab, s))
                alpha = float(np.clip(sLs / sy, 1e-6, 10.0))
            else:
                alpha = 1.0
        F0 = ev.f_eps
        accepted = False
        t = alpha
        for _ in range(60):
            trial = path.with_interior(path.interior() + t * d.reshape(K - 1, n))
            ev_new = _evaluate(trial, b, eps)
            if ev_new is not None and min_phi_guard > 0.0:
                if np.min(b.value(trial.nodes)) < min_phi_guard:
                    ev_new = None
            if ev_new is not None and check_dips and ps.max_dip_ratio(trial, b) < dip_ref:
                ev_new = None
            if ev_new is not None:
                dec = ARMIJO_C1 * t * slope
                if ev_new.f_eps <= F0 + dec:
                    accepted = True
                elif abs(t * slope) < ROUNDOFF * max(1.0, abs(F0)) and ev_new.f_eps <= F0 + ROUNDOFF * max(1.0, abs(F0)):
                    # below floating-point resolution of f: accept only if the residual improves
                    if _residual_rms(trial, b, ev_new) < res:
                        accepted = True
                if accepted:
                    break
            t *= 0.5
        if not accepted:
            reason = "line search stalled"
            break
        step = t * d
        prev = (step, ev_new.grad.reshape(-1) - flat_g)
        path, ev = trial, ev_new
        res = _residual_rms(path, b, ev)
        if res < cfg.grad_tol:
            return StageResult(path, True, it, res, ev.f_eps)
    return StageResult(path, False, it, res, ev.f_eps, reason)


def _banded_matvec(ab, x):
    u = ab.shape[0] - 1
    N = len(x)
    y = ab[u] * x
    for k in range(1, u + 1):
        band = ab[u - k, k:]
        y[:-k] += band * x[k:]
        y[k:] += band * x[:-k]
    return y


def _lift(p, q, m, winding):
    q = np.array(q, dtype=float)
    if winding is None:
        return q
    if isinstance(winding, (int, np.integer)):
        if not m.periodic_axes:
            raise ValueError("winding seed given for a manifold without periodic axes")
        winding = {m.periodic_axes[0][0]: int(winding)}
    periods = dict(m.periodic_axes)
    for axis, k in winding.items():
        q[int(axis)] += int(k) * periods[int(axis)]
    return q


def initial_path(p, q, b, K, winding=None, level=None):
    """Chart-linear seed, with low nodes flowed up to ``level``.

    Raises :class:`BoundaryViolationError` if a node lies outside the domain,
    since the flow cannot repair it.
    """
    m = b.manifold
    path = ps.DiscretePath.linear(p, _lift(p, q, m, winding), K)
    nodes = path.nodes.copy()
    inside = b.inside(nodes)
    if not np.all(inside):
        i = int(np.flatnonzero(~inside)[0])
        raise BoundaryViolationError(f"seed path node {i} at {nodes[i]} is outside the domain", node=i)
    if level is None:
        level = min(b.level_schedule[0], 0.5 * float(min(b.value(nodes[0]), b.value(nodes[-1]))))
    low = np.flatnonzero(b.value(nodes[1:-1]) < level) + 1
    if len(low):
        lifted, ok = _to_level_batch(b, nodes[low], level, 200)
        if not np.all(ok):
            raise BoundaryViolationError("could not lift seed path nodes away from the boundary")
        nodes[low] = lifted
    return ps.DiscretePath(nodes)


def _record(path, b, eps, stage):
    ev = ps.penalized_energy(path, b, eps)
    phi = b.value(path.nodes)
    v2 = ps.speeds(path, b.manifold) ** 2
    return StageRecord(
        eps=float(eps),
        f_eps=float(ev.f_eps),
        f=float(ev.f),
        min_phi=float(np.min(phi)),
        el_residual=float(np.max(ps.residual_profile(path, b, eps, ev))),
        E_spread=float(np.ptp(ev.E_profile)),
        max_lambda=float(np.max(ev.lambda_profile)),
        max_speed_sq=float(np.max(v2)),
        speed_bound=float(2.0 * (ev.f_eps + np.max(eps * phi**-2))),
        iterations=stage.iterations,
        converged=stage.converged,
    )


def _collapsing(history, cfg):
    n = cfg.collapse_stages
    if len(history) < n + 1:
        return False
    mins = [h.min_phi for h in history[-(n + 1):]]
    return all(b < cfg.collapse_ratio * a for a, b in zip(mins, mins[1:]))


def solve(p, q, b, cfg=None, init=None):
    """Geodesic from ``p`` to ``q`` in the domain of ``b`` by epsilon continuation.

    ``init`` is ``None``, a winding seed (int for the first periodic axis or a
    mapping axis -> turns), or a :class:`DiscretePath`.
    """
    cfg = cfg or SolverConfig()
    m = b.manifold
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    for label, x in (("p", p), ("q", q)):
        if not b.inside(x):
            raise BoundaryViolationError(f"endpoint {label}={x.tolist()} is not inside the domain (phi must be > 0)")
    seed_class = init if not isinstance(init, ps.DiscretePath) else None

    if isinstance(init, ps.DiscretePath):
        path = init
    else:
        q_lift = _lift(p, q, m, init)
        if np.array_equal(p, q_lift):
            path = ps.DiscretePath(np.repeat(p[None, :], cfg.K + 1, axis=0))
            rec = _record(path, b, cfg.eps0, StageResult(path, True, 0, 0.0, 0.0))
            return SolveReport(path, 0.0, [rec], rec.min_phi, True, None, 0.0, path.winding(m), seed_class)
        try:
            path = initial_path(p, q, b, cfg.K, init, cfg.init_level)
        except BoundaryViolationError as exc:
            log.info("seed %s rejected: %s", init, exc)
            path = ps.DiscretePath.linear(p, q_lift, cfg.K)
            return SolveReport(path, float("nan"), [], float("nan"), False, "invalid-seed", float("nan"), path.winding(m), seed_class)

    history = []
    failure = None
    eps = cfg.eps0
    for stage_no in range(cfg.max_outer_stages):
        eps = cfg.eps0 * cfg.eps_ratio**stage_no
        stage = minimize_stage(path, b, eps, cfg)
        path = stage.path
        history.append(_record(path, b, eps, stage))
        log.debug("stage %d eps=%.3g f=%.10g min_phi=%.4g iters=%d", stage_no, eps, history[-1].f, history[-1].min_phi, stage.iterations)
        if _collapsing(history, cfg):
            failure = "boundary-collapse"
            break
        if eps <= cfg.eps_min:
            break

    beta = min(h.min_phi for h in history)
    stages_ok = all(h.converged for h in history)
    if failure is None and cfg.polish:
        stage = minimize_stage(path, b, 0.0, cfg, min_phi_guard=0.5 * beta)
        path = stage.path
        history.append(_record(path, b, 0.0, stage))
        stages_ok = stages_ok and stage.converged
        beta = min(beta, history[-1].min_phi)

    geo_res = ps.el_residual(path, b, 0.0)
    f_value = ps.energy(path, m)
    converged = False
    if failure is None:
        checks = {
            "epsilon schedule not exhausted": eps <= cfg.eps_min,
            "inner minimization did not converge": stages_ok,
            "geodesic residual above tolerance": geo_res < 10.0 * cfg.grad_tol * cfg.K,
            "boundary bound lost": history[-1].min_phi >= cfg.beta_floor * history[0].min_phi and beta > 0,
            "path hops across the boundary": b.name == "whole_chart" or ps.max_dip_ratio(path, b) >= DIP_FLOOR,
        }
        failed = [k for k, v in checks.items() if not v]
        converged = not failed
        if failed:
            failure = failed[0]
    return SolveReport(path, f_value, history, float(beta), converged, failure, geo_res, path.winding(m), seed_class)


class ReportList(list):
    """Converged reports sorted by energy; ``dropped`` holds the rejected ones."""

    def __init__(self, reports=(), dropped=()):
        super().__init__(reports)
        self.dropped = list(dropped)


def solve_multiplicity(p, q, b, cfg=None, classes=(), workers=1):
    """One solve per winding seed; distinct converged geodesics sorted by ``f``."""
    cfg = cfg or SolverConfig()
    classes = list(classes)
    if not classes:
        return ReportList()

    def run(seed):
        return solve(p, q, b, cfg, seed)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(run, classes))
    else:
        reports = [run(c) for c in classes]

    kept, dropped = [], []
    for rep in sorted(reports, key=lambda r: (not r.converged, r.f_value if np.isfinite(r.f_value) else np.inf)):
        if not rep.converged:
            log.info("class %s dropped: %s", rep.seed_class, rep.failure_reason)
            dropped.append(rep)
            continue
        dup = any(
            k.path.nodes.shape == rep.path.nodes.shape
            and np.max(np.abs(b.manifold.wrap_delta(k.path.nodes - rep.path.nodes))) <= 10 * cfg.grad_tol
            for k in kept
        )
        if dup:
            rep.failure_reason = "duplicate"
            dropped.append(rep)
        else:
            kept.append(rep)
    return ReportList(kept, dropped)
