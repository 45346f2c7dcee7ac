"""
Winding classes on the flat cylinder
====================================

On the cylinder the endpoints (0,0) and (0,1) are joined by one geodesic per
winding number k, with energy (1 + 4 pi^2 k^2) / 2.  Removing a helix leaves a
single helical band, and only the class that follows the band survives.
"""

import numpy as np

from geodom import gallery
from geodom import problem as pb
from geodom.solver import solve_multiplicity

pd = pb.from_dict(gallery.get("flat_cylinder"))
for r in solve_multiplicity(pd.p, pd.q, pd.barrier, pd.solver, pd.classes):
    k = r.seed_class
    print(f"k={k}:  f={r.f_value:.6f}  exact={(1 + 4 * np.pi**2 * k * k) / 2:.6f}")

pd = pb.from_dict(gallery.get("cylinder_minus_helix"))
reports = solve_multiplicity(pd.p, pd.q, pd.barrier, pd.solver, pd.classes)
for r in reports:
    print(f"helix k={r.seed_class}: f={r.f_value:.6f} converged={r.converged}")
for r in reports.dropped:
    print(f"helix k={r.seed_class}: {r.failure_reason}")
