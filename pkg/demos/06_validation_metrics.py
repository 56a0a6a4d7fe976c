"""
Checking a lidar-lidar calibration
==================================

Two checks for a candidate transform T (sensor 2 in sensor 1):
the alignment of a plane normal seen by both sensors, and the mean
distance between matched points after mapping.
"""

import math

import numpy as np

from calibgraph import lie, validate
from calibgraph.lie import Pose, Rotation

rng = np.random.default_rng(5)
t = Pose(Rotation.from_rotvec([0.1, -0.3, 0.2]), [0.5, 0.0, 0.1])

# A floor plane: normal in sensor 1, and the same normal in sensor 2
n1 = np.array([0.0, 0.0, 1.0])
n2 = t.rotation.inverse().apply(n1)
print("D with the true transform:", validate.normal_alignment(n1, n2, t))

# Tilt the candidate by 0.1 rad about an axis in the plane
tilted = Pose(Rotation.from_rotvec([0.1, 0, 0]) @ t.rotation, t.translation)
print("D tilted:", validate.normal_alignment(n1, n2, tilted), "cos(0.1) =", math.cos(0.1))

# Point residual: a 5 cm translation error shows up directly
src = rng.uniform(-10, 10, (200, 3))
corr = validate.PointCorrespondences(src, lie.act(t, src))
print("E_l exact:", validate.point_residual(corr, t))
print("E_l off by 5 cm:", validate.point_residual(corr, Pose(t.rotation, t.translation + [0.05, 0, 0])))
