"""Sampling-based certification of boundary-convexity hypotheses.

Every verdict here is an empirical statement about sampled points.  Uniform
bounds "close to the boundary" are judged from how the sampled extremes scale
across the level schedule: a quantity growing at least like ``a**-p`` with
``p >= growth_threshold`` as the level ``a`` shrinks is reported unbounded.
"""

import json
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import domain as dm
from .domain import GRAD_FLOOR, Box, _to_level_batch
from .errors import UnusableRegionError
from .manifold import ScalarField, cov_hessian

PASS, FAIL, INDETERMINATE = "pass", "fail", "indeterminate"
# sampled magnitudes below this are finite-difference roundoff
NOISE_FLOOR = 1e-6
SAMPLING_CAVEAT = "sampled points and directions only"


class SparseLevelWarning(UserWarning):
    pass


def _level_points(b, a, n, seed, box, max_rounds=20):
    rng = np.random.default_rng(seed)
    pts = []
    attempts = 0
    for _ in range(max_rounds):
        cand = box.sample(rng, max(2 * n, 16))
        attempts += len(cand)
        cand = cand[b.inside(cand)]
        cand = cand[b.value(cand) > a]
        if len(cand):
            Y, ok = _to_level_batch(b, cand, a, dm.DEFAULT_FLOW_STEPS)
            Y = Y[ok]
            Y = Y[np.abs(b.value(Y) - a) < 1e-9]
            pts.extend(Y)
        if len(pts) >= n:
            break
    pts = np.array(pts[:n]).reshape(-1, b.manifold.dim)
    return pts, n - len(pts)


def level_sample(b, a, n, seed, box):
    """``n`` points on ``phi = a`` obtained by projecting seeded box samples."""
    if a <= 0:
        raise ValueError("level must be positive")
    pts, missing = _level_points(b, a, n, seed, box)
    if len(pts) < n / 2:
        warnings.warn(f"only {len(pts)} of {n} points reached level {a:g}", SparseLevelWarning, stacklevel=2)
    return pts


def _frame_quantities(b, X):
    """Hessian in a g-orthonormal frame, unit normal in that frame, |grad phi|."""
    m = b.manifold
    G = m.g(X)
    L = np.linalg.cholesky(G)
    Linv = np.linalg.inv(L)
    H = cov_hessian(m, b.phi, X)
    Hh = np.einsum("nij,njk,nlk->nil", Linv, H, Linv)
    df = b.differential(X)
    grad = np.linalg.solve(G, df[..., None])[..., 0]
    nu = np.einsum("nji,nj->ni", L, grad)
    gnorm = np.linalg.norm(nu, axis=-1)
    return Hh, nu, gnorm


def _tangent_basis(nu):
    # columns of Q span the orthogonal complement of nu (frame coordinates)
    n = nu.shape[-1]
    Q = np.empty(nu.shape[:-1] + (n, n - 1))
    for i, v in enumerate(nu.reshape(-1, n)):
        u, _, _ = np.linalg.svd(v[:, None])
        Q.reshape(-1, n, n - 1)[i] = u[:, 1:]
    return Q


def _ratios(b, X, mode):
    Hh, nu, gnorm = _frame_quantities(b, X)
    phi = b.value(X)
    ok = gnorm >= GRAD_FLOOR
    if mode == "all":
        top = np.linalg.eigvalsh(Hh)[:, -1]
    elif mode == "tangent":
        Q = _tangent_basis(np.where(ok[:, None], nu, 1.0))
        Ht = np.einsum("nia,nij,njb->nab", Q, Hh, Q)
        top = np.linalg.eigvalsh(Ht)[:, -1]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return top / phi, ok, gnorm


def estimate_M(b, a, samples, mode="tangent"):
    """Largest sampled ``H_phi(x)[v,v] / (<v,v> phi(x))`` over unit directions.

    ``mode="tangent"`` restricts ``v`` to the level tangent space, ``"all"``
    takes every direction.  The supremum over directions at a point is the top
    eigenvalue of the Hessian in a g-orthonormal frame, computed exactly.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if len(samples) == 0:
        return float("nan")
    vals, ok, _ = _ratios(b, samples, mode)
    if not np.any(ok):
        return float("nan")
    return float(np.max(vals[ok]))


def direction_ratio(b, x, v):
    """``H_phi(x)[v,v] / (<v,v> phi(x))`` for one explicit direction."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    H = cov_hessian(b.manifold, b.phi, x)
    G = b.manifold.g(x)
    return float((v @ H @ v) / ((v @ G @ v) * b.value(x)))


@dataclass(frozen=True)
class Verdict:
    status: str
    margin: float = float("nan")
    reason: str = ""


@dataclass(frozen=True)
class LevelRecord:
    a: float
    grad_min: float
    grad_max: float
    M_tangent: float
    M_all: float
    n_samples: int
    n_failures: int
    flow_C1: float = float("nan")
    flow_C2: float = float("nan")
    flow_C1_metric: float = float("nan")
    flow_C2_metric: float = float("nan")


@dataclass
class HypothesisConfig:
    box: Box
    n_samples: int = 200
    seed: int = 0
    levels: Optional[tuple] = None
    tol: float = 1e-9
    flow_samples: int = 100
    flow_s_max: float = np.inf
    growth_threshold: float = 0.25
    checks: tuple = ("ii", "iii", "iv", "t0", "t1", "t2")
    gordon_h: Optional[ScalarField] = None


@dataclass
class HypothesisReport:
    per_level: list
    flow_bounds: tuple
    verdicts: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "per_level": [asdict(r) for r in self.per_level],
            "flow_bounds": list(self.flow_bounds),
            "verdicts": {k: asdict(v) for k, v in sorted(self.verdicts.items())},
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1, default=float)

    def table(self):
        head = f"{'level':>10} {'min|grad|':>11} {'max|grad|':>11} {'M_tangent':>11} {'M_all':>11} {'C1':>9} {'C1_g':>9} {'n':>5} {'fail':>5}"
        lines = [head]
        for r in self.per_level:
            lines.append(
                f"{r.a:10.4g} {r.grad_min:11.4g} {r.grad_max:11.4g} {r.M_tangent:11.4g} {r.M_all:11.4g} "
                f"{r.flow_C1:9.4g} {r.flow_C1_metric:9.4g} {r.n_samples:5d} {r.n_failures:5d}"
            )
        lines.append("")
        for k, v in sorted(self.verdicts.items()):
            lines.append(f"{k:>10}: {v.status:<13} margin={v.margin:.4g}  {v.reason}")
        return "\n".join(lines)


def growth_exponent(levels, values, noise=NOISE_FLOOR):
    """Log-log slope of the running sup of ``values`` against ``1/level``.

    Levels are walked from the largest down; the running maximum mirrors a
    supremum over ``{phi >= a}``.  The fit uses the smaller half of the levels.
    Values at or below ``noise`` count as zero.
    """
    levels = np.asarray(levels, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = np.isfinite(values)
    levels, values = levels[keep], values[keep]
    order = np.argsort(levels)[::-1]
    levels = levels[order]
    values = np.maximum.accumulate(values[order])
    keep = values > noise
    levels, values = levels[keep], values[keep]
    if len(levels) < 2:
        return 0.0
    k = max(3, (len(levels) + 1) // 2)
    levels, values = levels[-k:], values[-k:]
    slope = np.polyfit(np.log(1.0 / levels), np.log(values), 1)[0]
    return float(slope)


def _bounded(levels, values, threshold):
    return growth_exponent(levels, values) < threshold


def check_hypotheses(b, cfg):
    """Fill a :class:`HypothesisReport` for every level of the schedule."""
    levels = tuple(cfg.levels) if cfg.levels is not None else b.level_schedule
    if not levels:
        raise ValueError("level schedule is empty")
    per_level = []
    want_flow = any(c in cfg.checks for c in ("iii", "t1"))
    for idx, a in enumerate(levels):
        pts, missing = _level_points(b, a, cfg.n_samples, cfg.seed + idx, cfg.box)
        if len(pts) == 0:
            per_level.append(LevelRecord(a, np.nan, np.nan, np.nan, np.nan, 0, cfg.n_samples))
            continue
        Mt, okt, gnorm = _ratios(b, pts, "tangent")
        Ma, oka, _ = _ratios(b, pts, "all")
        ok = okt & oka
        fb = (np.nan,) * 4
        if want_flow:
            try:
                bounds = dm.flow_derivative_bounds(b, cfg.box, cfg.flow_s_max, cfg.flow_samples, cfg.seed + 1000 + idx, a_floor=a)
                fb = bounds[:4]
            except UnusableRegionError:
                pass
        per_level.append(
            LevelRecord(
                a=float(a),
                grad_min=float(np.min(gnorm)),
                grad_max=float(np.max(gnorm)),
                M_tangent=float(np.max(Mt[ok])) if np.any(ok) else np.nan,
                M_all=float(np.max(Ma[ok])) if np.any(ok) else np.nan,
                n_samples=int(np.count_nonzero(ok)),
                n_failures=int(missing + np.count_nonzero(~ok)),
                flow_C1=float(fb[0]),
                flow_C2=float(fb[1]),
                flow_C1_metric=float(fb[2]),
                flow_C2_metric=float(fb[3]),
            )
        )
    last = per_level[-1]
    report = HypothesisReport(per_level, (last.flow_C1, last.flow_C2))
    report.verdicts = _verdicts(b, per_level, cfg)
    return report


def _verdicts(b, rows, cfg):
    thr = cfg.growth_threshold
    a = np.array([r.a for r in rows])
    gmin = np.array([r.grad_min for r in rows])
    gmax = np.array([r.grad_max for r in rows])
    Mt = np.array([r.M_tangent for r in rows])
    Ma = np.array([r.M_all for r in rows])
    out = {}

    sparse = [r.a for r in rows if r.n_samples < cfg.n_samples / 2]
    note = SAMPLING_CAVEAT + (f"; sparse levels {sparse}" if sparse else "")

    if np.any(~np.isfinite(gmin)):
        lower = Verdict(INDETERMINATE, np.nan, "levels without samples; " + note)
    elif np.min(gmin) <= GRAD_FLOOR or not _bounded(a, 1.0 / gmin, thr):
        lower = Verdict(FAIL, float(np.min(gmin)), f"min |grad phi| -> 0 (exponent {growth_exponent(a, 1.0 / gmin):.2f}); {note}")
    else:
        lower = Verdict(PASS, float(np.min(gmin)), note)
    if np.any(~np.isfinite(gmax)):
        upper = Verdict(INDETERMINATE, np.nan, "levels without samples; " + note)
    elif not _bounded(a, gmax, thr):
        upper = Verdict(FAIL, float(np.max(gmax)), f"max |grad phi| grows like a^-{growth_exponent(a, gmax):.2f}; {note}")
    else:
        upper = Verdict(PASS, float(np.max(gmax)), note)
    out["ii_lower"] = lower
    out["ii_upper"] = upper
    out["ii"] = _combine([lower, upper], "gradient bounds a <= |grad phi| <= b")

    c1 = np.array([r.flow_C1 for r in rows])
    c2 = np.array([r.flow_C2 for r in rows])
    c1g = np.array([r.flow_C1_metric for r in rows])
    c2g = np.array([r.flow_C2_metric for r in rows])
    if np.all(np.isnan(c1)):
        iii = Verdict(INDETERMINATE, np.nan, "flow bounds not sampled")
    else:
        chart_ok = _bounded(a, c1, thr) and _bounded(a, c2, thr)
        metric_ok = _bounded(a, c1g, thr) and _bounded(a, c2g, thr)
        margin = float(np.nanmax(c1g))
        if chart_ok and metric_ok:
            iii = Verdict(PASS, margin, note)
        elif chart_ok:
            iii = Verdict(
                INDETERMINATE,
                margin,
                f"flow derivatives bounded in chart norm but unbounded in metric norm "
                f"(exponent {growth_exponent(a, c1g):.2f}); norm not fixed by the hypothesis",
            )
        else:
            iii = Verdict(FAIL, float(np.nanmax(c1)), f"flow derivatives unbounded in chart norm; {note}")
    out["iii"] = iii

    Mt_pos = np.where(Mt > 0, Mt, 0.0)
    if np.any(np.isnan(Mt)):
        iv = Verdict(INDETERMINATE, np.nan, "levels without samples")
    elif _bounded(a, Mt_pos, thr):
        iv = Verdict(PASS, float(np.max(Mt)), "M_tangent bounded above; " + note)
    else:
        iv = Verdict(FAIL, float(np.max(Mt)), f"M_tangent grows like a^-{growth_exponent(a, Mt_pos):.2f}; {note}")
    out["iv"] = iv

    Ma_pos = np.where(Ma > 0, Ma, 0.0)
    if np.any(np.isnan(Ma)):
        all_dirs = Verdict(INDETERMINATE, np.nan, "levels without samples")
    elif _bounded(a, Ma_pos, thr):
        all_dirs = Verdict(PASS, float(np.max(Ma)), "M_all bounded above; " + note)
    else:
        all_dirs = Verdict(FAIL, float(np.max(Ma)), f"M_all grows like a^-{growth_exponent(a, Ma_pos):.2f}; {note}")
    out["M_all"] = all_dirs

    if np.any(np.isnan(Mt)):
        t0 = Verdict(INDETERMINATE, np.nan, "levels without samples")
    elif np.max(Mt) <= cfg.tol and np.min(gmin) > GRAD_FLOOR:
        t0 = Verdict(PASS, float(np.max(Mt)), "level sets have convex boundary; " + note)
    else:
        t0 = Verdict(FAIL, float(np.max(Mt)), f"M_tangent = {np.max(Mt):.3g} > tol at some level; {note}")
    out["t0"] = t0
    out["t1"] = _combine([out["ii"], iii, iv], "invading levels with bounded loss of convexity")
    out["t2"] = _combine([out["ii"], all_dirs], "Hessian bound in all directions")

    if cfg.gordon_h is not None:
        out["gordon"] = _gordon(b, cfg, rows)
    wanted = set(cfg.checks) | {"ii_lower", "ii_upper"} | ({"gordon"} if cfg.gordon_h is not None else set())
    if "t2" in cfg.checks:
        wanted.add("M_all")
    return {k: v for k, v in out.items() if k in wanted}


def _combine(parts, what):
    statuses = [p.status for p in parts]
    reasons = "; ".join(p.reason for p in parts if p.status != PASS)
    if FAIL in statuses:
        return Verdict(FAIL, np.nan, reasons)
    if INDETERMINATE in statuses:
        return Verdict(INDETERMINATE, np.nan, reasons)
    return Verdict(PASS, np.nan, what)


def _gordon(b, cfg, rows):
    """Proper positive convex function test for a user-supplied ``h``."""
    h = cfg.gordon_h
    m = b.manifold
    rng = np.random.default_rng(cfg.seed + 7)
    X = cfg.box.sample(rng, 4 * cfg.n_samples)
    X = X[b.inside(X)][: cfg.n_samples]
    if len(X) == 0:
        return Verdict(INDETERMINATE, np.nan, "no interior samples")
    hv = h(X)
    if np.any(hv <= 0):
        return Verdict(FAIL, float(np.min(hv)), "h is not positive")
    H = cov_hessian(m, h, X)
    L = np.linalg.cholesky(m.g(X))
    Linv = np.linalg.inv(L)
    lo = np.linalg.eigvalsh(np.einsum("nij,njk,nlk->nil", Linv, H, Linv))[:, 0]
    scale = np.maximum(1.0, np.max(np.abs(H), axis=(1, 2)))
    worst = float(np.min(lo / scale))
    if worst < -cfg.tol:
        return Verdict(FAIL, worst, "covariant Hessian of h has a negative direction")
    mins = []
    levels = [r.a for r in rows]
    for idx, a in enumerate(levels):
        pts, _ = _level_points(b, a, max(8, cfg.n_samples // 4), cfg.seed + 500 + idx, cfg.box)
        mins.append(float(np.min(h(pts))) if len(pts) else np.nan)
    mins = np.array(mins)
    order = np.argsort(levels)[::-1]
    seq = mins[order]
    if np.any(np.isnan(seq)) or not np.all(np.diff(seq) > 0):
        return Verdict(FAIL, worst, "h does not grow toward the boundary along the level schedule")
    return Verdict(PASS, worst, "convex and growing toward the boundary; properness is only probed by sampling")


def rescaling_check(b, warp, warp_deriv, a, samples):
    """Defect of ``H_{warp(phi)}[v,v] = warp'(phi) H_phi[v,v]`` on level tangents.

    Both Hessians are computed from values only (finite differences), so the
    check exercises the Hessian engine independently of any analytic derivative.
    """
    m = b.manifold
    base = b.phi.without_derivatives()
    warped = ScalarField(lambda x: warp(base(x)), name="warped")
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    phi = base(X)
    if np.any(warp_deriv(phi) <= 0):
        raise ValueError("warp derivative must be positive on the sampled range")
    H = cov_hessian(m, base, X)
    Hs = cov_hessian(m, warped, X)
    G = m.g(X)
    df = base.differential(X)
    grad = np.linalg.solve(G, df[..., None])[..., 0]
    n = m.dim
    worst = 0.0
    rng = np.random.default_rng(0)
    for i in range(len(X)):
        gi = grad[i]
        if np.sqrt(gi @ G[i] @ gi) < GRAD_FLOOR:
            continue
        # g-orthogonal complement of grad phi
        nu = G[i] @ gi
        basis = np.linalg.svd(nu[None, :])[2][1:]
        dirs = list(basis) + [c @ basis for c in rng.normal(size=(2, n - 1))] if n > 1 else []
        for v in dirs:
            v = v / np.sqrt(v @ G[i] @ v)
            lhs = v @ Hs[i] @ v
            rhs = warp_deriv(phi[i]) * (v @ H[i] @ v)
            worst = max(worst, abs(lhs - rhs) / (1.0 + abs(v @ H[i] @ v)))
    return float(worst)
