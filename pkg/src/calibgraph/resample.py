"""Leave-one-out (Jackknife) variance of a pairwise calibration estimate.

Each leave-one-out estimate is expressed as a twist relative to the
full-sample estimate, ``rho_i = log(P_full^-1 P_i)``, so that the
per-component variance is taken in a single tangent space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import handeye, lie
from .errors import CalibError, ConvergenceError, EstimatorError, InvalidArgumentError
from .handeye import MotionPair
from .lie import Pose

DEFAULT_VARIANCE_FLOOR = 1e-10


@dataclass(frozen=True, eq=False)
class VarianceEstimate:
    rho_hat: np.ndarray
    variance: np.ndarray
    m: int
    reference: Pose | None = None

    def as_dict(self):
        return {
            "rho_hat": [float(v) for v in self.rho_hat],
            "variance": [float(v) for v in self.variance],
            "m": self.m,
            "reference": None if self.reference is None else [float(v) for v in self.reference.to_vector7()],
        }


def tangent_mean(poses, tol=1e-12, max_iterations=50):
    """Iterative mean in the tangent space, started at the first pose."""
    poses = list(poses)
    if not poses:
        raise InvalidArgumentError("tangent_mean needs at least one pose")
    mean = poses[0]
    first = mean.to_vector7()
    if all(np.array_equal(p.to_vector7(), first) for p in poses[1:]):
        return mean
    for _ in range(max_iterations):
        inv = mean.inverse()
        step = np.zeros(6)
        for p in poses:
            step += lie.log(inv @ p)
        step /= len(poses)
        mean = mean @ lie.exp(step)
        if np.linalg.norm(step) < tol:
            return mean
    raise ConvergenceError(f"tangent mean did not converge in {max_iterations} iterations")


def mean_pose_estimator(samples):
    """Estimator for repeated direct measurements of the same transform."""
    return tangent_mean(samples)


def handeye_estimator(samples):
    """Estimator solving AX = XB over a set of MotionPairs."""
    return handeye.solve(samples).x


def sample_key(sample):
    """Canonical ordering key for Pose and MotionPair samples."""
    if isinstance(sample, Pose):
        return tuple(sample.to_vector7())
    if isinstance(sample, MotionPair):
        return tuple(sample.a.to_vector7()) + tuple(sample.b.to_vector7())
    raise TypeError(f"no canonical order for {type(sample).__name__}")


def jackknife(estimator, samples, key=sample_key):
    """Jackknife variance of ``estimator`` over ``samples``.

    Samples are first sorted by ``key`` (pass ``key=None`` to keep the given
    order), which makes the result independent of input ordering.
    Returns a VarianceEstimate whose ``variance`` is
    ``(m - 1)/m * sum_i (rho_i - rho_hat)**2`` per component.
    """
    samples = list(samples)
    if key is not None:
        samples.sort(key=key)
    m = len(samples)
    if m < 3:
        raise InvalidArgumentError(f"jackknife needs at least 3 samples, got {m}")
    try:
        reference = estimator(samples)
    except CalibError as exc:
        raise EstimatorError(None, exc) from exc
    ref_inv = reference.inverse()
    ref_vec = reference.to_vector7()
    rho = np.empty((m, 6))
    for i in range(m):
        try:
            est = estimator(samples[:i] + samples[i + 1:])
        except CalibError as exc:
            raise EstimatorError(i, exc) from exc
        # an estimate equal to the reference has zero deviation, not round-off
        rho[i] = 0.0 if np.array_equal(est.to_vector7(), ref_vec) else lie.log(ref_inv @ est)
    rho_hat = np.zeros(6)
    for i in range(m):
        rho_hat = rho_hat + rho[i]
    rho_hat = rho_hat / m
    ss = np.zeros(6)
    for i in range(m):
        d = rho[i] - rho_hat
        ss = ss + d * d
    variance = (m - 1) / m * ss
    return VarianceEstimate(rho_hat=rho_hat, variance=variance, m=m, reference=reference)


def information_from_variance(v, floor=DEFAULT_VARIANCE_FLOOR):
    """Diagonal information matrix ``diag(1 / max(var_k, floor))``."""
    if not floor > 0:
        raise InvalidArgumentError("variance floor must be positive")
    var = v.variance if isinstance(v, VarianceEstimate) else np.asarray(v, dtype=float)
    return np.diag(1.0 / np.maximum(var, floor))
