"""
Geodesic in the open quadrant
=============================

The quadrant x, y > 0 is cut out by phi = sqrt(xy).  It is convex, so the
straight segment between two interior points is the geodesic, and the
penalized solver should find it.
"""

import numpy as np

from geodom import Barrier, SolverConfig, solve
from geodom.domain import sqrt_xy
from geodom.manifold import euclidean
from geodom.pathspace import DiscretePath

m = euclidean(2)
b = Barrier(m, sqrt_xy())
p, q = np.array([1.0, 2.0]), np.array([2.0, 1.0])

rep = solve(p, q, b, SolverConfig(K=200))
print("converged:", rep.converged, " f =", rep.f_value)

# the penalty weight is halved stage by stage; min phi stays away from 0
for h in rep.history[::4]:
    print(f"eps={h.eps:9.2e}  f_eps={h.f_eps:.8f}  min phi={h.min_phi:.4f}  residual={h.el_residual:.1e}")

seg = DiscretePath.linear(p, q, 200).nodes
print("max distance to the segment:", np.max(np.abs(rep.path.nodes - seg)))
