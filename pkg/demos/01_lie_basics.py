"""
Rigid transforms and their tangent space
========================================

Poses are stored as a unit quaternion plus a translation. Twists are
6-vectors ``[translation part, rotation part]`` and are mapped to and from
poses by ``exp`` and ``log``.
"""

import math

import numpy as np

from calibgraph import lie
from calibgraph.errors import BranchError
from calibgraph.lie import Pose, Rotation

# A quarter turn about z, built from a twist
quarter = lie.exp([0, 0, 0, 0, 0, math.pi / 2])
print(np.round(quarter.rotation.matrix, 12))

# Poses compose with @ and act on points
t = Pose(Rotation.from_rotvec([0, 0, math.pi / 2]), [1, 0, 0])
print("t * (1, 0, 0) =", t.act([1, 0, 0]))

# log is the inverse of exp on the principal branch
xi = np.array([0.3, -0.1, 0.2, 0.05, 0.1, -0.04])
print("log(exp(xi)) - xi =", lie.log(lie.exp(xi)) - xi)

# Small perturbations are applied on the right: P <- P exp(n)
rng = np.random.default_rng(0)
noise = lie.sample_perturbation(0.01, rng)
noisy = t @ lie.exp(noise)
ang, dist = lie.pose_distance(t, noisy)
print(f"perturbed by {ang:.4f} rad and {dist:.4f} m")

# Rotation angles within 1e-9 of pi have no unique log
try:
    lie.log(Pose(Rotation.from_rotvec([math.pi, 0, 0])))
except BranchError as exc:
    print("half turn:", exc)
