"""Geodesics in open domains of Riemannian manifolds by boundary penalization.

Submodules: ``manifold`` (charts, metrics, Hessians), ``domain`` (barriers and
their normalized gradient flow), ``pathspace`` (discrete action and penalty),
``solver`` (continuation in the penalty weight), ``convexity`` (sampled
hypothesis checks), ``jacobi`` (fixed-energy trajectories), ``problem`` and
``gallery`` (problem documents and builtin examples), ``cli``.
"""

__version__ = "0.1.0"

from .convexity import HypothesisConfig, HypothesisReport, check_hypotheses, estimate_M, level_sample, rescaling_check
from .domain import Barrier, Box, flow, flow_derivative_bounds, geometric_levels, project_to_level
from .errors import (
    BoundaryReachError,
    BoundaryViolationError,
    ChartDomainError,
    DegenerateGradientError,
    EnergyLevelError,
    EscapeError,
    GeodomError,
    IllConditionedMetricError,
    ProblemDefinitionError,
    UnusableRegionError,
    WrongSideError,
)
from .jacobi import LagrangianProblem, Trajectory, hessian_transform_check, jacobi_metric, rep_check, trajectory_from_geodesic
from .manifold import ChartManifold, ScalarField, TangentVector, christoffel, cov_hessian, geodesic_shoot, inner, riem_grad
from .pathspace import DiscretePath, el_residual, energy, penalized_energy
from .solver import SolveReport, SolverConfig, solve, solve_multiplicity

__all__ = [name for name in dir() if not name.startswith("_")]
