"""Builtin example problems.

Each entry is a complete problem-definition document (see :mod:`geodom.problem`).
Expected outcomes live next to this module in ``expected/<name>.json`` and are
replayed by ``geodom gallery run-all``.
"""

import copy
import json
from importlib import resources

EUCLID = {"name": "euclidean", "params": {"dim": 2}}
HELIX = {"name": "dist_to_helix", "params": {"pitch": 1.0, "width": 0.3}, "levels": [0.1, 0.05, 0.025, 0.0125, 0.00625, 0.003125]}

PROBLEMS = {
    "quadrant_sqrtxy": {
        "description": "open quadrant x, y > 0 with phi = sqrt(xy); the segment is the geodesic",
        "manifold": EUCLID,
        "barrier": {"name": "sqrt_xy"},
        "p": [1.0, 2.0],
        "q": [2.0, 1.0],
        "checks": {"box": [[1e-6, 1e-6], [3.0, 3.0]], "n_samples": 100, "flow_samples": 40, "checks": ["ii", "t0"]},
    },
    "quadrant_xy": {
        "description": "open quadrant with phi = xy: gradient bounded above locally, not below",
        "manifold": EUCLID,
        "barrier": {"name": "xy"},
        "p": [1.0, 2.0],
        "q": [2.0, 1.0],
        "checks": {"box": [[1e-6, 1e-6], [3.0, 3.0]], "n_samples": 100, "flow_samples": 40, "checks": ["ii"]},
    },
    "punctured_plane": {
        "description": "plane minus the origin with dr^2 + r^-2 dtheta^2 and phi = r",
        "manifold": {"name": "polar_inverse_r2"},
        "barrier": {"name": "radial_r"},
        "p": [1.0, 0.0],
        "q": [1.5, 2.0],
        "checks": {"box": [[1e-6, 0.0], [2.0, 6.283185307179586]], "n_samples": 100, "flow_samples": 40, "checks": ["t2"]},
    },
    "half_plane": {
        "description": "upper half-plane with phi = y",
        "manifold": EUCLID,
        "barrier": {"name": "half_plane_y"},
        "p": [-1.0, 1.0],
        "q": [1.0, 1.0],
        "checks": {"box": [[-2.0, 0.0], [2.0, 2.0]], "n_samples": 100, "flow_samples": 40, "checks": ["t0"]},
    },
    "unit_disk": {
        "description": "open unit disk with phi = 1 - |x|^2",
        "manifold": EUCLID,
        "barrier": {"name": "unit_disk"},
        "p": [-0.5, 0.0],
        "q": [0.5, 0.3],
        "checks": {
            "box": [[-1.0, -1.0], [1.0, 1.0]],
            "n_samples": 100,
            "flow_samples": 40,
            "checks": ["t0"],
            "gordon_h": "inverse_phi",
        },
    },
    "flat_cylinder": {
        "description": "flat cylinder, whole chart; winding classes k have f = (1 + 4 pi^2 k^2) / 2",
        "manifold": {"name": "flat_cylinder"},
        "barrier": {"name": "whole_chart"},
        "p": [0.0, 0.0],
        "q": [0.0, 1.0],
        "solver": {"classes": [0, 1, 2]},
    },
    "cylinder_minus_helix": {
        "description": "flat cylinder minus a helix of pitch 1; phi is the capped distance to the helix",
        "manifold": {"name": "flat_cylinder"},
        "barrier": HELIX,
        "p": [0.0, 0.5],
        "q": [0.0, 1.5],
        "solver": {"classes": [-1, 0, 1, 2]},
    },
    "cylinder_minus_helix_perturbed": {
        "description": "cylinder minus a helix with the conformal factor 1 - 0.25 cos(theta)",
        "manifold": {
            "name": "conformal",
            "params": {"base": {"name": "flat_cylinder"}, "E": 1.0, "V": {"name": "cos_axis", "params": {"axis": 0, "amp": 0.25}}},
        },
        "barrier": HELIX,
        "p": [0.0, 0.5],
        "q": [0.0, 1.5],
        "solver": {"winding": 1},
    },
    "nonconvex_sine": {
        "description": "phi = y + 0.5 sin x: level sets are not convex",
        "manifold": EUCLID,
        "barrier": {"name": "sine_half_plane", "params": {"amp": 0.5}},
        "p": [-1.0, 1.5],
        "q": [1.0, 1.5],
        "checks": {"box": [[-4.0, -1.0], [4.0, 3.0]], "n_samples": 100, "flow_samples": 40, "checks": ["t0", "t1"]},
    },
    "harmonic_half_plane": {
        "description": "harmonic oscillator V = |x|^2/2 at energy 2 in the upper half-plane",
        "manifold": EUCLID,
        "barrier": {"name": "half_plane_y"},
        "p": [0.0, 0.5],
        "q": [0.0, 1.5],
        "solver": {"K": 400},
        "checks": {"box": [[-1.0, 0.0], [1.0, 1.5]], "n_samples": 100, "flow_samples": 40, "checks": ["t0"]},
        "lagrangian": {"V": {"name": "harmonic"}, "E": 2.0},
    },
    "free_particle_quadrant": {
        "description": "free particle at energy 1/2 in the quadrant; the trajectory is the segment",
        "manifold": EUCLID,
        "barrier": {"name": "sqrt_xy"},
        "p": [1.0, 2.0],
        "q": [2.0, 1.0],
        "checks": {"box": [[1e-6, 1e-6], [3.0, 3.0]], "n_samples": 50, "flow_samples": 20, "checks": ["t0"]},
        "lagrangian": {"V": {"name": "zero"}, "E": 0.5},
    },
}


def names():
    return sorted(PROBLEMS)


def get(name):
    """Full problem-definition document for a gallery entry."""
    if name not in PROBLEMS:
        raise KeyError(f"no gallery problem {name!r}; known: {', '.join(names())}")
    doc = {"version": 1, "name": name}
    doc.update(copy.deepcopy(PROBLEMS[name]))
    return doc


def expected(name):
    """Expected-outcome fixture, or ``None`` if none ships."""
    ref = resources.files(__package__).joinpath("expected", f"{name}.json")
    if not ref.is_file():
        return None
    return json.loads(ref.read_text(encoding="utf-8"))
