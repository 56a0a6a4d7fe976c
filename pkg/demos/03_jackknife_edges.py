"""
Edge weights from leave-one-out resampling
==========================================

A pairwise calibration gives one transform but no uncertainty. The
Jackknife re-runs the estimator with each sample left out; the spread of
those estimates (in the tangent space of the full estimate) gives a
per-component variance, and its reciprocal becomes the edge information.
"""

import numpy as np

from calibgraph import fileio, resample, synth

rng = np.random.default_rng(3)
x_true = synth.random_pose(rng)

for noise in (0.01, 0.005):
    pairs = synth.generate_motion_pairs(x_true, 20, rng, noise=noise)
    est = resample.jackknife(resample.handeye_estimator, pairs)
    print(f"noise {noise}: variance", np.array2string(est.variance, precision=2))

# Repeated direct measurements of one transform use the tangent-space mean
shots = synth.generate_direct_measurements(x_true, 8, rng, 0.02)
est = resample.jackknife(resample.mean_pose_estimator, shots)
info = resample.information_from_variance(est)
print(fileio.format_edge(0, 1, est.reference, info, "lidar_camera"))

# Identical samples: zero variance, so the floor keeps the information finite
est = resample.jackknife(resample.mean_pose_estimator, [x_true] * 5)
print("floored information diagonal:", np.diag(resample.information_from_variance(est)))
