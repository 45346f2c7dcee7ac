"""
Sampling the convexity hypotheses
=================================

The checker samples level sets phi = a for a shrinking schedule of levels and
watches how gradient norms, tangential Hessians and flow derivatives behave as
a -> 0.
"""

from geodom import check_hypotheses, gallery
from geodom import problem as pb

for name in ("quadrant_sqrtxy", "quadrant_xy", "punctured_plane", "nonconvex_sine"):
    pd = pb.from_dict(gallery.get(name))
    rep = check_hypotheses(pd.barrier, pd.checks)
    print(f"== {name}")
    print(rep.table())
    print()
