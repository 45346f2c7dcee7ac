"""
Fixed-energy trajectory of the harmonic oscillator
==================================================

Trajectories of xdot' = -x with energy E are geodesics of (E - |x|^2/2) g up
to a time change.  We solve the geodesic problem in the half-plane y > 0 and
compare with the closed-form flow.
"""

import numpy as np
from scipy.optimize import fsolve

from geodom import gallery
from geodom import problem as pb
from geodom.jacobi import solve_trajectory

pd = pb.from_dict(gallery.get("harmonic_half_plane"))
rep, traj = solve_trajectory(pd.lagrangian, pd.p, pd.q, pd.solver)
print("converged:", traj.converged, " flight time:", traj.t[-1])
print("energy spread:", traj.energy_spread)

# closed form x(t) = p cos t + v0 sin t, launched straight up
p, q = pd.p, pd.q
speed = np.sqrt(2 * pd.lagrangian.E - p @ p)
T = fsolve(lambda t: p[1] * np.cos(t) + speed * np.sin(t) - q[1], 0.6)[0]
exact = np.outer(np.cos(traj.t), p) + np.outer(np.sin(traj.t), [0.0, speed])
print("closed-form time:", T, " sup error:", np.max(np.linalg.norm(traj.x - exact, axis=1)))
