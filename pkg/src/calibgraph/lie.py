"""SO(3)/SE(3) toolkit: rotations, rigid poses, exponential and logarithm maps.

Tangent vectors of SE(3) ("twists") are ordered translation first::

    xi = [dx, dy, dz, phix, phiy, phiz]

and every 6x6 matrix in the package (information matrices, Jacobians,
adjoints) uses the same block layout. Optimization updates are applied on
the right, ``P <- P @ exp(xi)``.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import BranchError, InvalidArgumentError

# Below this angle the closed-form coefficients are replaced by their series.
SMALL_ANGLE = 1e-3
# log() refuses rotations whose angle is this close to pi.
BRANCH_MARGIN = 1e-9
# Quaternions read from files are kept verbatim when already this close to unit norm.
_UNIT_TOL = 1e-14


def hat(v):
    """Skew-symmetric matrix such that ``hat(v) @ w == cross(v, w)``."""
    x, y, z = np.asarray(v, dtype=float).tolist()
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(m):
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def _quat_mul(p, q):
    # scalar-last Hamilton product
    px, py, pz, pw = p.tolist()
    qx, qy, qz, qw = q.tolist()
    return np.array([
        pw * qx + px * qw + py * qz - pz * qy,
        pw * qy - px * qz + py * qw + pz * qx,
        pw * qz + px * qy - py * qx + pz * qw,
        pw * qw - px * qx - py * qy - pz * qz,
    ])


def _canonical(q):
    q = np.asarray(q, dtype=float)
    if q[3] < 0.0:
        q = -q
    q.setflags(write=False)
    return q


class Rotation:
    """An element of SO(3), stored as a unit quaternion ``(x, y, z, w)`` with ``w >= 0``."""

    __slots__ = ("_q", "_m")

    def __init__(self, quaternion):
        q = np.asarray(quaternion, dtype=float).reshape(4)
        if not np.all(np.isfinite(q)):
            raise InvalidArgumentError("quaternion has non-finite components")
        n2 = float(q @ q)
        if n2 == 0.0:
            raise InvalidArgumentError("zero quaternion")
        if abs(n2 - 1.0) > _UNIT_TOL:
            q = q / math.sqrt(n2)
        self._q = _canonical(q)
        self._m = None

    @classmethod
    def _unchecked(cls, q):
        # q: finite, float ndarray; only renormalized when off unit norm
        n2 = float(q @ q)
        if abs(n2 - 1.0) > _UNIT_TOL:
            q = q / math.sqrt(n2)
        r = cls.__new__(cls)
        r._q = _canonical(q)
        r._m = None
        return r

    @classmethod
    def identity(cls):
        return cls((0.0, 0.0, 0.0, 1.0))

    @classmethod
    def from_quaternion(cls, q):
        """Build from a scalar-last quaternion; it is normalized if needed."""
        return cls(q)

    @classmethod
    def from_matrix(cls, m):
        """Build from a 3x3 rotation matrix (Shepperd's method)."""
        m = np.asarray(m, dtype=float)
        if m.shape != (3, 3) or not np.all(np.isfinite(m)):
            raise InvalidArgumentError("expected a finite 3x3 matrix")
        tr = m[0, 0] + m[1, 1] + m[2, 2]
        i = int(np.argmax([m[0, 0], m[1, 1], m[2, 2], tr]))
        if i == 3:
            s = 2.0 * math.sqrt(1.0 + tr)
            q = [(m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s, 0.25 * s]
        else:
            j, k = (i + 1) % 3, (i + 2) % 3
            s = 2.0 * math.sqrt(1.0 + m[i, i] - m[j, j] - m[k, k])
            q = [0.0, 0.0, 0.0, (m[k, j] - m[j, k]) / s]
            q[i] = 0.25 * s
            q[j] = (m[j, i] + m[i, j]) / s
            q[k] = (m[k, i] + m[i, k]) / s
        return cls(q)

    @classmethod
    def from_rotvec(cls, phi):
        """Rotation by angle ``|phi|`` about axis ``phi / |phi|``."""
        phi = np.asarray(phi, dtype=float).reshape(3)
        if not np.all(np.isfinite(phi)):
            raise InvalidArgumentError("rotation vector has non-finite components")
        theta = math.sqrt(float(phi @ phi))
        if theta < SMALL_ANGLE:
            t2 = theta * theta
            k = 0.5 - t2 / 48.0 + t2 * t2 / 3840.0
        else:
            k = math.sin(0.5 * theta) / theta
        return cls(np.append(k * phi, math.cos(0.5 * theta)))

    @property
    def quaternion(self):
        """Scalar-last unit quaternion, read-only."""
        return self._q

    @property
    def matrix(self):
        """3x3 rotation matrix, read-only."""
        if self._m is None:
            x, y, z, w = self._q.tolist()
            m = np.array([
                [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
                [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
                [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
            ])
            m.setflags(write=False)
            self._m = m
        return self._m

    @property
    def angle(self):
        v = self._q[:3]
        return 2.0 * math.atan2(math.sqrt(float(v @ v)), self._q[3])

    def rotvec(self):
        """Angle-axis vector on the principal branch.

        Raises BranchError when the angle is within ``BRANCH_MARGIN`` of pi.
        """
        v = self._q[:3]
        w = self._q[3]
        s = math.sqrt(float(v @ v))
        theta = 2.0 * math.atan2(s, w)
        if theta > math.pi - BRANCH_MARGIN:
            raise BranchError(f"rotation angle {theta!r} is within {BRANCH_MARGIN} of pi")
        if s < SMALL_ANGLE * w:
            x2 = (s / w) ** 2
            k = (2.0 / w) * (1.0 - x2 / 3.0 + x2 * x2 / 5.0)
        else:
            k = theta / s
        return k * v

    def inverse(self):
        x, y, z, w = self._q.tolist()
        # no cache sharing: a transposed view can take a different matmul path
        return Rotation._unchecked(np.array([-x, -y, -z, w]))

    def apply(self, v):
        return self.matrix @ np.asarray(v, dtype=float)

    def __matmul__(self, other):
        if isinstance(other, Rotation):
            return Rotation._unchecked(_quat_mul(self._q, other._q))
        return NotImplemented

    def __reduce__(self):
        return (Rotation, (np.array(self._q),))

    def __repr__(self):
        return "Rotation(quaternion=[{}])".format(", ".join(f"{c:.17g}" for c in self._q))


class Pose:
    """A rigid transform ``x -> R x + t``.

    Instances are immutable; ``a @ b`` composes, ``p.inverse()`` inverts.
    """

    __slots__ = ("rotation", "translation")

    def __init__(self, rotation=None, translation=(0.0, 0.0, 0.0)):
        if rotation is None:
            rotation = Rotation.identity()
        elif not isinstance(rotation, Rotation):
            rotation = Rotation.from_matrix(rotation)
        t = np.array(translation, dtype=float).reshape(3)
        if not np.all(np.isfinite(t)):
            raise InvalidArgumentError("translation has non-finite components")
        t.setflags(write=False)
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", t)

    def __setattr__(self, name, value):
        raise AttributeError("Pose is immutable")

    def __reduce__(self):
        return (Pose.from_vector7, (self.to_vector7(),))

    @classmethod
    def _unchecked(cls, rotation, translation):
        translation.setflags(write=False)
        p = cls.__new__(cls)
        object.__setattr__(p, "rotation", rotation)
        object.__setattr__(p, "translation", translation)
        return p

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m, dtype=float)
        if m.shape != (4, 4):
            raise InvalidArgumentError("expected a 4x4 homogeneous matrix")
        return cls(Rotation.from_matrix(m[:3, :3]), m[:3, 3])

    @classmethod
    def from_vector7(cls, values):
        """Parse ``tx ty tz qx qy qz qw``."""
        values = np.asarray(values, dtype=float).reshape(7)
        return cls(Rotation(values[3:]), values[:3])

    def to_vector7(self):
        return np.concatenate([self.translation, self.rotation.quaternion])

    @property
    def matrix(self):
        m = np.eye(4)
        m[:3, :3] = self.rotation.matrix
        m[:3, 3] = self.translation
        return m

    def inverse(self):
        r_inv = self.rotation.inverse()
        return Pose._unchecked(r_inv, -(r_inv.matrix @ self.translation))

    def act(self, point):
        return self.rotation.matrix @ np.asarray(point, dtype=float) + self.translation

    def __matmul__(self, other):
        if isinstance(other, Pose):
            return Pose._unchecked(self.rotation @ other.rotation,
                                   self.rotation.matrix @ other.translation + self.translation)
        return NotImplemented

    def __repr__(self):
        return "Pose(t=[{}], q=[{}])".format(
            ", ".join(f"{c:.6g}" for c in self.translation),
            ", ".join(f"{c:.6g}" for c in self.rotation.quaternion),
        )


def compose(a, b):
    return a @ b


def inverse(p):
    return p.inverse()


def act(p, point):
    """Apply ``p`` to a 3-vector (or an ``(n, 3)`` array of points)."""
    point = np.asarray(point, dtype=float)
    if point.ndim == 2:
        return point @ p.rotation.matrix.T + p.translation
    return p.act(point)


def _v_coeffs(theta):
    # V = I + a K + b K^2, K = hat(phi)
    if theta < SMALL_ANGLE:
        t2 = theta * theta
        a = 0.5 - t2 / 24.0 + t2 * t2 / 720.0
        b = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
    else:
        a = (1.0 - math.cos(theta)) / theta**2
        b = (theta - math.sin(theta)) / theta**3
    return a, b


def _vinv_coeff(theta):
    # V^-1 = I - K/2 + c K^2
    if theta < SMALL_ANGLE:
        t2 = theta * theta
        return 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    half = 0.5 * theta
    return (1.0 - half * math.cos(half) / math.sin(half)) / theta**2


def so3_left_jacobian(phi):
    """Left Jacobian of SO(3); equals the translation coupling matrix V of exp."""
    phi = np.asarray(phi, dtype=float)
    theta = float(np.linalg.norm(phi))
    a, b = _v_coeffs(theta)
    k = hat(phi)
    return np.eye(3) + a * k + b * (k @ k)


def so3_left_jacobian_inv(phi):
    phi = np.asarray(phi, dtype=float)
    theta = float(np.linalg.norm(phi))
    k = hat(phi)
    return np.eye(3) - 0.5 * k + _vinv_coeff(theta) * (k @ k)


def _check_twist(xi):
    xi = np.asarray(xi, dtype=float).reshape(6)
    if not np.all(np.isfinite(xi)):
        raise InvalidArgumentError("twist has non-finite components")
    return xi


def _cross(a, b):
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


def exp(xi):
    """SE(3) exponential of a twist ``[dx, dy, dz, phix, phiy, phiz]``."""
    xi = _check_twist(xi)
    rot = Rotation.from_rotvec(xi[3:])
    rho = xi[:3].tolist()
    phi = xi[3:].tolist()
    theta = math.sqrt(phi[0] ** 2 + phi[1] ** 2 + phi[2] ** 2)
    a, b = _v_coeffs(theta)
    # V rho = rho + a phi x rho + b phi x (phi x rho)
    c1 = _cross(phi, rho)
    c2 = _cross(phi, c1)
    t = np.array([rho[k] + a * c1[k] + b * c2[k] for k in range(3)])
    return Pose._unchecked(rot, t)


def log(p):
    """SE(3) logarithm, principal branch. Raises BranchError near a half turn."""
    phi_arr = p.rotation.rotvec()
    phi = phi_arr.tolist()
    t = p.translation.tolist()
    theta = math.sqrt(phi[0] ** 2 + phi[1] ** 2 + phi[2] ** 2)
    c = _vinv_coeff(theta)
    c1 = _cross(phi, t)
    c2 = _cross(phi, c1)
    return np.array([t[0] - 0.5 * c1[0] + c * c2[0],
                     t[1] - 0.5 * c1[1] + c * c2[1],
                     t[2] - 0.5 * c1[2] + c * c2[2],
                     phi[0], phi[1], phi[2]])


def adjoint(p):
    """6x6 adjoint so that ``p @ exp(xi) @ p.inverse() == exp(adjoint(p) @ xi)``."""
    r = p.rotation.matrix
    ad = np.zeros((6, 6))
    ad[:3, :3] = r
    ad[3:, 3:] = r
    ad[:3, 3:] = hat(p.translation) @ r
    return ad


def ad(xi):
    """Lie-algebra adjoint (6x6) of a twist."""
    xi = np.asarray(xi, dtype=float)
    m = np.zeros((6, 6))
    rho_hat = hat(xi[:3])
    phi_hat = hat(xi[3:])
    m[:3, :3] = phi_hat
    m[3:, 3:] = phi_hat
    m[:3, 3:] = rho_hat
    return m


def _q_block(xi):
    rho, phi = xi[:3], xi[3:]
    theta = float(np.linalg.norm(phi))
    if theta < SMALL_ANGLE:
        t2 = theta * theta
        c1 = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
        c2 = 1.0 / 24.0 - t2 / 720.0 + t2 * t2 / 40320.0
        c3 = 1.0 / 120.0 - t2 / 2520.0 + t2 * t2 / 120960.0
    else:
        s, c = math.sin(theta), math.cos(theta)
        c1 = (theta - s) / theta**3
        c2 = (theta * theta + 2.0 * c - 2.0) / (2.0 * theta**4)
        c3 = (2.0 * theta - 3.0 * s + theta * c) / (2.0 * theta**5)
    p = hat(phi)
    r = hat(rho)
    pr = p @ r
    rp = r @ p
    prp = pr @ p
    pp = p @ p
    return (
        0.5 * r
        + c1 * (pr + rp + prp)
        + c2 * (pp @ r + rp @ p - 3.0 * prp)
        + c3 * (prp @ p + pp @ r @ p)
    )


def se3_left_jacobian(xi):
    xi = np.asarray(xi, dtype=float)
    j = so3_left_jacobian(xi[3:])
    out = np.zeros((6, 6))
    out[:3, :3] = j
    out[3:, 3:] = j
    out[:3, 3:] = _q_block(xi)
    return out


def se3_left_jacobian_inv(xi):
    xi = np.asarray(xi, dtype=float)
    j_inv = so3_left_jacobian_inv(xi[3:])
    out = np.zeros((6, 6))
    out[:3, :3] = j_inv
    out[3:, 3:] = j_inv
    out[:3, 3:] = -j_inv @ _q_block(xi) @ j_inv
    return out


def se3_right_jacobian_inv(xi):
    """Inverse right Jacobian: ``log(exp(xi) @ exp(d)) ~= xi + Jr^-1(xi) d``."""
    return se3_left_jacobian_inv(-np.asarray(xi, dtype=float))


def sample_perturbation(sigma, rng):
    """Draw a twist with independent components ``N(0, sigma_k**2)``.

    ``sigma`` may be a scalar or a 6-vector of standard deviations.
    """
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (6,))
    if np.any(sigma < 0) or not np.all(np.isfinite(sigma)):
        raise InvalidArgumentError("standard deviations must be finite and non-negative")
    return rng.standard_normal(6) * sigma


def random_rotation(rng):
    """Uniformly distributed rotation (normalized Gaussian quaternion)."""
    while True:
        q = rng.standard_normal(4)
        n = np.linalg.norm(q)
        if n > 1e-6:
            return Rotation(q / n)


def pose_distance(a, b):
    """Rotation angle (rad) and translation distance (m) between two poses."""
    d = a.inverse() @ b
    return d.rotation.angle, float(np.linalg.norm(a.translation - b.translation))
