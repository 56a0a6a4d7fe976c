"""Closed-form hand-eye calibration, ``A_i X = X B_i``.

``A_i`` are relative motions of the "eye" frame and ``B_i`` the
corresponding motions of the "hand" frame; ``X`` is the pose of the hand
frame expressed in the eye frame. Rotation comes from an orthogonal
Procrustes fit of the motion rotation axes, translation from a stacked
linear least-squares system.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import lie
from .errors import DegenerateMotionError, InvalidArgumentError, UnderConstrainedError
from .lie import Pose, Rotation

MIN_ROTATION_ANGLE = 1e-3
MIN_AXIS_SEPARATION = 1e-3
ANGLE_MISMATCH_WARNING = 0.05
RANK_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class MotionPair:
    a: Pose
    b: Pose

    def angle_mismatch(self):
        return abs(self.a.rotation.angle - self.b.rotation.angle)


@dataclass(frozen=True)
class HandEyeResult:
    x: Pose
    rotation_residual_rms: float
    translation_residual_rms: float
    condition_indicator: float


def _check_pairs(pairs):
    pairs = list(pairs)
    if len(pairs) < 2:
        raise DegenerateMotionError(f"hand-eye needs at least two motion pairs, got {len(pairs)}")
    for k, p in enumerate(pairs):
        mismatch = p.angle_mismatch()
        if mismatch > ANGLE_MISMATCH_WARNING:
            warnings.warn(
                f"motion pair {k}: rotation angles of A and B differ by {mismatch:.3f} rad",
                stacklevel=3,
            )
    return pairs


def _check_excitation(axes):
    """Require two non-negligible rotations about non-parallel axes."""
    strong = [v / np.linalg.norm(v) for v in axes if np.linalg.norm(v) > MIN_ROTATION_ANGLE]
    if len(strong) < 2:
        raise DegenerateMotionError("fewer than two motions rotate by more than "
                                    f"{MIN_ROTATION_ANGLE} rad")
    u = strong[0]
    for v in strong[1:]:
        # lines through the origin, so u and -u count as parallel
        sep = math.atan2(float(np.linalg.norm(np.cross(u, v))), abs(float(u @ v)))
        if sep > MIN_AXIS_SEPARATION:
            return
    raise DegenerateMotionError("all rotation axes are parallel; the rotation about them is unobservable")


def solve_rotation(pairs):
    """Rotation of X from the axis relation ``alpha_i = R_x beta_i``."""
    pairs = _check_pairs(pairs)
    alphas = np.array([p.a.rotation.rotvec() for p in pairs])
    betas = np.array([p.b.rotation.rotvec() for p in pairs])
    _check_excitation(alphas)
    m = alphas.T @ betas
    u, _, vt = np.linalg.svd(m)
    d = np.ones(3)
    d[2] = np.sign(np.linalg.det(u @ vt))
    return Rotation.from_matrix(u @ np.diag(d) @ vt)


def _translation_system(pairs, r_x):
    rows = []
    rhs = []
    rx = r_x.matrix
    for p in pairs:
        rows.append(p.a.rotation.matrix - np.eye(3))
        rhs.append(rx @ p.b.translation - p.a.translation)
    return np.vstack(rows), np.concatenate(rhs)


def solve_translation(pairs, r_x, *, return_condition=False):
    """Least-squares ``t_x`` from ``(R_a - I) t_x = R_x t_b - t_a`` stacked over pairs."""
    pairs = _check_pairs(pairs)
    c, d = _translation_system(pairs, r_x)
    u, s, vt = np.linalg.svd(c, full_matrices=False)
    if s[-1] <= RANK_TOLERANCE * max(s[0], 1.0):
        null = vt[-1]
        null = null * np.sign(null[np.argmax(np.abs(null))])
        raise UnderConstrainedError(
            "translation is unobservable along direction "
            f"({null[0]:.3f}, {null[1]:.3f}, {null[2]:.3f}); add rotations about another axis",
            null,
        )
    t = vt.T @ ((u.T @ d) / s)
    if return_condition:
        return t, float(s[-1])
    return t


def residuals(pairs, x):
    """Per-pair rotation (rad) and translation (m) discrepancies of ``A X`` vs ``X B``."""
    rot = []
    trans = []
    for p in pairs:
        xi = lie.log((p.a @ x) @ (x @ p.b).inverse())
        trans.append(float(np.linalg.norm(xi[:3])))
        rot.append(float(np.linalg.norm(xi[3:])))
    return np.array(rot), np.array(trans)


def solve(pairs):
    pairs = list(pairs)
    with warnings.catch_warnings():
        # warn once below, not per sub-solver
        warnings.simplefilter("ignore")
        r_x = solve_rotation(pairs)
        t_x, cond = solve_translation(pairs, r_x, return_condition=True)
    _check_pairs(pairs)
    x = Pose(r_x, t_x)
    rot, trans = residuals(pairs, x)
    return HandEyeResult(
        x=x,
        rotation_residual_rms=float(np.sqrt(np.mean(rot**2))),
        translation_residual_rms=float(np.sqrt(np.mean(trans**2))),
        condition_indicator=cond,
    )


def relative_motions(absolute_poses):
    """Consecutive relative motions ``P_k^-1 P_{k+1}`` of an absolute pose sequence."""
    poses = list(absolute_poses)
    if len(poses) < 2:
        raise InvalidArgumentError("need at least two absolute poses")
    return [p.inverse() @ q for p, q in zip(poses[:-1], poses[1:])]


def pair_motions(eye_poses, hand_poses):
    """MotionPairs from synchronized absolute pose sequences of both frames."""
    eye_poses = list(eye_poses)
    hand_poses = list(hand_poses)
    if len(eye_poses) != len(hand_poses):
        raise InvalidArgumentError(
            f"pose sequences differ in length ({len(eye_poses)} vs {len(hand_poses)})")
    return [MotionPair(a, b) for a, b in zip(relative_motions(eye_poses), relative_motions(hand_poses))]
