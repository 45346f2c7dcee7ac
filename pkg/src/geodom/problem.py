"""Problem-definition documents: parsing, validation, hashing, construction.

A problem definition is one JSON object::

    {
      "version": 1,
      "name": "quadrant_sqrtxy",
      "manifold": {"name": "euclidean", "params": {"dim": 2}},
      "barrier": {"name": "sqrt_xy", "params": {}, "levels": [0.5, 0.25]},
      "p": [1, 2], "q": [2, 1],
      "solver": {"K": 200, "winding": null, "classes": null},
      "checks": {"box": [[0, 0], [3, 3]], "checks": ["ii", "t0"]},
      "lagrangian": {"V": {"name": "harmonic", "params": {}}, "E": 2}
    }

Only ``version``, ``manifold``, ``barrier``, ``p`` and ``q`` are required.
"""

import copy
import hashlib
import json
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from . import domain as dm
from . import jacobi as jc
from . import manifold as mf
from .convexity import HypothesisConfig
from .domain import Barrier, Box
from .errors import ProblemDefinitionError
from .manifold import ScalarField
from .solver import SolverConfig

FORMAT_VERSION = 1


def _field_1_over_phi(b):
    def value(x):
        return 1.0 / b.value(x)

    return ScalarField(value, name="inverse_phi")


def _field_neg_log_phi(b):
    def value(x):
        return -np.log(b.value(x))

    return ScalarField(value, name="neg_log_phi")


def _cos_axis(axis=0, amp=0.25):
    def value(x):
        return amp * np.cos(x[..., axis])

    def grad(x):
        out = np.zeros(np.shape(x))
        out[..., axis] = -amp * np.sin(x[..., axis])
        return out

    def hess(x):
        out = np.zeros(np.shape(x) + (np.shape(x)[-1],))
        out[..., axis, axis] = -amp * np.cos(x[..., axis])
        return out

    return ScalarField(value, grad, hess, name=f"cos_axis({axis},{amp:g})")


POTENTIALS = {
    "zero": jc.zero_potential,
    "harmonic": jc.harmonic,
    "linear_y": jc.linear_y,
    "quadratic_y": jc.quadratic_y,
    "cos_axis": _cos_axis,
}

BARRIERS = {
    "sqrt_xy": dm.sqrt_xy,
    "xy": dm.xy,
    "radial_r": dm.radial_r,
    "half_plane_y": dm.half_plane_y,
    "unit_disk": dm.unit_disk,
    "sine_half_plane": dm.sine_half_plane,
    "dist_to_helix": dm.dist_to_helix,
    "coordinate": dm.coordinate,
    "whole_chart": None,
}

GORDON_FIELDS = {"inverse_phi": _field_1_over_phi, "neg_log_phi": _field_neg_log_phi}


def _build_potential(block, where):
    name, params = _name_params(block, where)
    if name not in POTENTIALS:
        raise ProblemDefinitionError(f"unknown potential {name!r}; known: {sorted(POTENTIALS)}", f"{where}.name")
    try:
        return POTENTIALS[name](**params)
    except TypeError as exc:
        raise ProblemDefinitionError(str(exc), f"{where}.params") from None


def _build_manifold(block, where="manifold"):
    name, params = _name_params(block, where)
    try:
        if name == "euclidean":
            return mf.euclidean(**params)
        if name == "polar_inverse_r2":
            return mf.polar_inverse_r2(**params)
        if name == "flat_cylinder":
            return mf.flat_cylinder(**params)
        if name == "conformal":
            params = dict(params)
            base = _build_manifold(params.pop("base", {"name": "euclidean"}), f"{where}.params.base")
            V = _build_potential(params.pop("V", None), f"{where}.params.V")
            E = float(params.pop("E"))
            if params:
                raise ProblemDefinitionError(f"unexpected keys {sorted(params)}", f"{where}.params")
            return jc.conformal(base, E, V)
    except (TypeError, KeyError) as exc:
        raise ProblemDefinitionError(f"bad parameters ({exc})", f"{where}.params") from None
    raise ProblemDefinitionError(
        f"unknown manifold {name!r}; known: ['conformal', 'euclidean', 'flat_cylinder', 'polar_inverse_r2']", f"{where}.name"
    )


def _name_params(block, where):
    if isinstance(block, str):
        return block, {}
    if not isinstance(block, dict) or "name" not in block:
        raise ProblemDefinitionError("expected an object with a 'name' field", where)
    params = block.get("params", {}) or {}
    if not isinstance(params, dict):
        raise ProblemDefinitionError("params must be an object", f"{where}.params")
    return block["name"], params


def _point(value, where, dim):
    try:
        x = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ProblemDefinitionError("expected a list of numbers", where) from None
    if x.shape != (dim,):
        raise ProblemDefinitionError(f"expected {dim} coordinates, got shape {x.shape}", where)
    return x


@dataclass
class ProblemDef:
    """Parsed problem definition plus the objects it describes."""

    raw: dict
    manifold: object
    barrier: Barrier
    p: np.ndarray
    q: np.ndarray
    solver: SolverConfig
    winding: object = None
    classes: Optional[list] = None
    checks: Optional[HypothesisConfig] = None
    lagrangian: Optional[jc.LagrangianProblem] = None

    @property
    def name(self):
        return self.raw.get("name", "problem")

    @property
    def hash(self):
        return problem_hash(self.raw)


def canonical_json(d):
    return json.dumps(d, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def problem_hash(raw):
    return hashlib.sha256(canonical_json(raw).encode()).hexdigest()


def loads(text, source="<string>"):
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemDefinitionError(f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return from_dict(raw)


def load(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read(), str(path))


def from_dict(raw, overrides=None):
    """Validate ``raw`` and build every object it references.

    ``overrides`` may set ``seed``, ``eps0``, ``K`` and ``levels``; they are
    folded into the stored document so the hash reflects what actually ran.
    """
    if not isinstance(raw, dict):
        raise ProblemDefinitionError("top level must be an object")
    raw = copy.deepcopy(raw)
    _apply_overrides(raw, overrides or {})
    version = raw.get("version")
    if version != FORMAT_VERSION:
        raise ProblemDefinitionError(f"unsupported version {version!r}, expected {FORMAT_VERSION}", "version")
    for key in ("manifold", "barrier", "p", "q"):
        if key not in raw:
            raise ProblemDefinitionError("missing required field", key)
    known = {"version", "name", "description", "manifold", "barrier", "p", "q", "solver", "checks", "lagrangian"}
    extra = sorted(set(raw) - known)
    if extra:
        raise ProblemDefinitionError(f"unknown fields {extra}")

    m = _build_manifold(raw["manifold"])
    bname, bparams = _name_params(raw["barrier"], "barrier")
    if bname not in BARRIERS:
        raise ProblemDefinitionError(f"unknown barrier {bname!r}; known: {sorted(BARRIERS)}", "barrier.name")
    levels = raw["barrier"].get("levels") if isinstance(raw["barrier"], dict) else None
    try:
        if bname == "whole_chart":
            b = Barrier.whole_chart(m)
        else:
            phi = BARRIERS[bname](**bparams)
            kw = {} if levels is None else {"level_schedule": tuple(float(a) for a in levels)}
            b = Barrier(m, phi, name=bname, **kw)
    except TypeError as exc:
        raise ProblemDefinitionError(f"bad parameters ({exc})", "barrier.params") from None
    except ValueError as exc:
        raise ProblemDefinitionError(str(exc), "barrier.levels") from None

    p = _point(raw["p"], "p", m.dim)
    q = _point(raw["q"], "q", m.dim)
    for label, x in (("p", p), ("q", q)):
        if not b.inside(x):
            with np.errstate(all="ignore"):
                val = float(b.value(x)) if m.in_chart(x) else float("nan")
            raise ProblemDefinitionError(f"endpoint {label}={x.tolist()} is not inside the domain (phi = {val:g})", label)

    solver_raw = dict(raw.get("solver") or {})
    winding = solver_raw.pop("winding", None)
    classes = solver_raw.pop("classes", None)
    allowed = {f.name for f in fields(SolverConfig)}
    bad = sorted(set(solver_raw) - allowed)
    if bad:
        raise ProblemDefinitionError(f"unknown solver options {bad}", "solver")
    try:
        cfg = SolverConfig(**solver_raw)
    except (TypeError, ValueError) as exc:
        raise ProblemDefinitionError(str(exc), "solver") from None

    checks = None
    if raw.get("checks"):
        checks = _build_checks(raw["checks"], b, m.dim)

    lag = None
    if raw.get("lagrangian"):
        block = raw["lagrangian"]
        if "V" not in block or "E" not in block:
            raise ProblemDefinitionError("needs 'V' and 'E'", "lagrangian")
        V = _build_potential(block["V"], "lagrangian.V")
        lag = jc.LagrangianProblem(m, V, float(block["E"]), b)

    return ProblemDef(raw, m, b, p, q, cfg, winding, classes, checks, lag)


def _build_checks(block, b, dim):
    block = dict(block)
    if "box" not in block:
        raise ProblemDefinitionError("missing sampling box", "checks.box")
    try:
        lo, hi = block.pop("box")
        box = Box(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
    except (TypeError, ValueError) as exc:
        raise ProblemDefinitionError(f"expected [lo, hi] ({exc})", "checks.box") from None
    if box.dim != dim:
        raise ProblemDefinitionError(f"box has dimension {box.dim}, manifold {dim}", "checks.box")
    h = block.pop("gordon_h", None)
    if h is not None:
        if h not in GORDON_FIELDS:
            raise ProblemDefinitionError(f"unknown field {h!r}; known: {sorted(GORDON_FIELDS)}", "checks.gordon_h")
        block["gordon_h"] = GORDON_FIELDS[h](b)
    if "checks" in block:
        block["checks"] = tuple(block["checks"])
    if "levels" in block:
        block["levels"] = tuple(float(a) for a in block["levels"])
    try:
        return HypothesisConfig(box=box, **block)
    except TypeError as exc:
        raise ProblemDefinitionError(str(exc), "checks") from None


def _apply_overrides(raw, ov):
    solver = raw.setdefault("solver", {}) if any(k in ov for k in ("seed", "eps0", "K")) else raw.get("solver")
    if ov.get("seed") is not None:
        solver["seed"] = int(ov["seed"])
        if isinstance(raw.get("checks"), dict):
            raw["checks"]["seed"] = int(ov["seed"])
    if ov.get("eps0") is not None:
        solver["eps0"] = float(ov["eps0"])
    if ov.get("K") is not None:
        solver["K"] = int(ov["K"])
    if ov.get("levels") is not None:
        if isinstance(raw.get("barrier"), str):
            raw["barrier"] = {"name": raw["barrier"]}
        raw["barrier"]["levels"] = [float(a) for a in ov["levels"]]
    if ov.get("checks") is not None and isinstance(raw.get("checks"), dict):
        raw["checks"]["checks"] = list(ov["checks"])
