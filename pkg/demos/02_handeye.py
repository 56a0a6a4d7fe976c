"""
Hand-eye calibration: AX = XB
=============================

Two rigidly mounted frames move together. For each motion we know the
relative motion of the "eye" (A) and of the "hand" (B); the unknown mounting
transform X satisfies A X = X B.
"""

import warnings

import numpy as np

from calibgraph import handeye, lie, synth
from calibgraph.errors import UnderConstrainedError

rng = np.random.default_rng(42)
x_true = synth.random_pose(rng)

# Noise-free motions recover X to machine precision
pairs = synth.generate_motion_pairs(x_true, 10, rng)
res = handeye.solve(pairs)
print("noise-free error (rad, m):", lie.pose_distance(res.x, x_true))
print("residual RMS:", res.rotation_residual_rms, res.translation_residual_rms)

# With 5 mrad / 5 mm of motion noise the error stays at the noise level
noisy = synth.generate_motion_pairs(x_true, 20, rng, noise=0.005)
res = handeye.solve(noisy)
print("noisy error (rad, m):", lie.pose_distance(res.x, x_true))

# Rotating about a single axis leaves the translation along it unobservable
axis = x_true.rotation.inverse().apply([0, 0, 1])
flat = [handeye.MotionPair(x_true @ b @ x_true.inverse(), b)
        for b in (lie.Pose(lie.Rotation.from_rotvec(a * axis), rng.uniform(-1, 1, 3)) for a in (0.5, 1.0))]
try:
    handeye.solve_translation(flat, x_true.rotation)
except UnderConstrainedError as exc:
    print("single axis:", exc)

# Pairs whose rotation angles disagree are probably mismatched; the solver warns
with warnings.catch_warnings(record=True) as caught:
    warnings.simplefilter("always")
    a = noisy[0].a
    bad = handeye.MotionPair(lie.Pose(lie.Rotation.from_rotvec(1.5 * a.rotation.rotvec()), a.translation), noisy[0].b)
    handeye.solve([bad] + noisy[1:])
print([str(w.message) for w in caught])
