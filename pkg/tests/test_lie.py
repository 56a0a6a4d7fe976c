import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from calibgraph import lie
from calibgraph.errors import BranchError, InvalidArgumentError
from calibgraph.lie import Pose, Rotation

from conftest import expm_taylor, hat4, random_pose

finite = st.floats(-3.0, 3.0, allow_nan=False)
twists = st.lists(finite, min_size=6, max_size=6).map(np.array)


def small_rotation_twist(xi):
    # keep the rotation part on the principal branch with a safety margin
    phi = xi[3:]
    n = np.linalg.norm(phi)
    if n > math.pi - 1e-3:
        xi = xi.copy()
        xi[3:] *= (math.pi - 1e-3) / n
    return xi


def test_exp_zero_is_identity():
    p = lie.exp(np.zeros(6))
    np.testing.assert_array_equal(p.matrix, np.eye(4))


def test_exp_quarter_turn_about_z():
    p = lie.exp([0, 0, 0, 0, 0, math.pi / 2])
    np.testing.assert_allclose(p.rotation.matrix, [[0, -1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-15)
    np.testing.assert_array_equal(p.translation, 0.0)
    assert p.rotation.angle == pytest.approx(math.pi / 2, abs=1e-15)


def test_exp_matches_taylor_series_oracle():
    xi = np.array([1, 2, 3, 0.1, -0.2, 0.3])
    p = lie.exp(xi)
    np.testing.assert_allclose(p.matrix, expm_taylor(hat4(xi)), atol=1e-13)
    np.testing.assert_allclose(lie.log(p), xi, atol=1e-10)


def test_exp_rejects_non_finite():
    with pytest.raises(InvalidArgumentError):
        lie.exp([0, 0, np.nan, 0, 0, 0])


def test_log_identity_and_pure_translation():
    np.testing.assert_array_equal(lie.log(Pose.identity()), np.zeros(6))
    np.testing.assert_array_equal(lie.log(Pose(None, [1, 0, 0])), [1, 0, 0, 0, 0, 0])


def test_log_round_trip_small_twist():
    xi = np.array([0.3, -0.1, 0.2, 0.05, 0.1, -0.04])
    np.testing.assert_allclose(lie.log(lie.exp(xi)), xi, atol=1e-10)


def test_log_near_half_turn_raises():
    p = Pose(Rotation.from_rotvec([0, 0, math.pi]))
    with pytest.raises(BranchError):
        lie.log(p)
    # just inside the margin is still accepted
    lie.log(Pose(Rotation.from_rotvec([0, 0, math.pi - 1e-6])))


def test_compose_identity_and_act():
    rng = np.random.default_rng(3)
    p = random_pose(rng)
    q = p @ Pose.identity()
    np.testing.assert_array_equal(q.to_vector7(), p.to_vector7())
    t = Pose(Rotation.from_rotvec([0, 0, math.pi / 2]), [1, 0, 0])
    np.testing.assert_allclose(lie.act(t, [1, 0, 0]), [1, 1, 0], atol=1e-15)


def test_compose_matches_homogeneous_product(rng):
    for _ in range(50):
        a, b = random_pose(rng), random_pose(rng)
        np.testing.assert_allclose((a @ b).matrix, a.matrix @ b.matrix, atol=1e-12)


def test_act_on_point_arrays(rng):
    p = random_pose(rng)
    pts = rng.standard_normal((5, 3))
    batched = lie.act(p, pts)
    for k in range(5):
        np.testing.assert_allclose(batched[k], p.act(pts[k]), atol=1e-15)


def test_group_axioms(rng):
    for _ in range(100):
        a, b, c = random_pose(rng), random_pose(rng), random_pose(rng)
        lhs = (a @ b) @ c
        rhs = a @ (b @ c)
        assert lie.pose_distance(lhs, rhs)[0] < 1e-9
        assert lie.pose_distance(lhs, rhs)[1] < 1e-9
        ang, dist = lie.pose_distance(a @ a.inverse(), Pose.identity())
        assert ang < 1e-9 and dist < 1e-9
        ang, dist = lie.pose_distance(a.inverse() @ a, Pose.identity())
        assert ang < 1e-9 and dist < 1e-9
        np.testing.assert_allclose(a.inverse().inverse().matrix, a.matrix, atol=1e-12)


def test_act_of_composition(rng):
    for _ in range(50):
        a, b = random_pose(rng), random_pose(rng)
        x = rng.standard_normal(3)
        np.testing.assert_allclose((a @ b).act(x), a.act(b.act(x)), atol=1e-9)


def test_matrix_views_are_valid(rng):
    for _ in range(100):
        p = random_pose(rng)
        r = p.rotation.matrix
        np.testing.assert_allclose(r.T @ r, np.eye(3), atol=1e-9)
        assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-9)
        assert np.linalg.norm(p.rotation.quaternion) == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_array_equal(p.matrix[3], [0, 0, 0, 1])


def test_matrix_quaternion_round_trip(rng):
    for _ in range(200):
        r = random_pose(rng).rotation
        back = Rotation.from_matrix(r.matrix)
        np.testing.assert_allclose(back.quaternion, r.quaternion, atol=1e-12)
        np.testing.assert_allclose(Rotation(r.quaternion).matrix, r.matrix, atol=1e-12)


def test_from_matrix_matches_rodrigues_at_all_shepperd_branches():
    for axis in np.eye(3):
        for angle in (0.3, 2.0, math.pi - 1e-3):
            r = Rotation.from_rotvec(angle * axis)
            np.testing.assert_allclose(Rotation.from_matrix(r.matrix).rotvec(), angle * axis, atol=1e-12)


def test_translation_coupling_matches_series(rng):
    # exp translation equals V(phi) rho; V = sum_k K^k / (k+1)!
    for _ in range(30):
        xi = rng.standard_normal(6)
        k = lie.hat(xi[3:])
        v = np.zeros((3, 3))
        term = np.eye(3)
        for n in range(40):
            v += term / math.factorial(n + 1)
            term = term @ k
        np.testing.assert_allclose(lie.exp(xi).translation, v @ xi[:3], atol=1e-12)
    # pure rotation twist: translation is exactly zero
    np.testing.assert_array_equal(lie.exp([0, 0, 0, 0.4, -0.2, 0.1]).translation, 0.0)


@pytest.mark.parametrize("theta", [0.0, 1e-9, 1e-5, 9.99e-4, 1.001e-3, 0.5, 3.0])
def test_small_angle_branches_are_continuous(theta):
    axis = np.array([0.6, -0.8, 0.0])
    xi = np.concatenate([[0.2, -0.1, 0.4], theta * axis])
    np.testing.assert_allclose(lie.exp(xi).matrix, expm_taylor(hat4(xi)), atol=1e-14)
    np.testing.assert_allclose(lie.log(lie.exp(xi)), xi, atol=1e-14)


def test_adjoint_conjugation(rng):
    for _ in range(30):
        p = random_pose(rng)
        xi = 0.3 * rng.standard_normal(6)
        lhs = p @ lie.exp(xi) @ p.inverse()
        rhs = lie.exp(lie.adjoint(p) @ xi)
        np.testing.assert_allclose(lhs.matrix, rhs.matrix, atol=1e-12)


def test_left_jacobian_inverse_pair(rng):
    for _ in range(30):
        xi = rng.standard_normal(6)
        np.testing.assert_allclose(lie.se3_left_jacobian(xi) @ lie.se3_left_jacobian_inv(xi), np.eye(6), atol=1e-12)


def test_left_jacobian_matches_series(rng):
    # J_l = sum_k ad(xi)^k / (k+1)!
    for _ in range(20):
        xi = rng.standard_normal(6)
        a = lie.ad(xi)
        j = np.zeros((6, 6))
        term = np.eye(6)
        for n in range(50):
            j += term / math.factorial(n + 1)
            term = term @ a
        np.testing.assert_allclose(lie.se3_left_jacobian(xi), j, atol=1e-12)


def test_right_jacobian_inverse_first_order(rng):
    for _ in range(20):
        xi = rng.standard_normal(6)
        d = 1e-7 * rng.standard_normal(6)
        lhs = lie.log(lie.exp(xi) @ lie.exp(d))
        np.testing.assert_allclose(lhs, xi + lie.se3_right_jacobian_inv(xi) @ d, atol=1e-12)


def test_sample_perturbation_zero_sigma_and_determinism():
    rng = np.random.default_rng(0)
    np.testing.assert_array_equal(lie.sample_perturbation(np.zeros(6), rng), np.zeros(6))
    a = [lie.sample_perturbation(0.1, np.random.default_rng(5)) for _ in range(3)]
    b = [lie.sample_perturbation(0.1, np.random.default_rng(5)) for _ in range(3)]
    np.testing.assert_array_equal(a, b)


def test_sample_perturbation_statistics():
    rng = np.random.default_rng(11)
    draws = np.array([lie.sample_perturbation(np.full(6, 0.05), rng) for _ in range(100_000)])
    np.testing.assert_allclose(draws.std(axis=0), 0.05, rtol=0.03)


def test_sample_perturbation_rejects_negative():
    with pytest.raises(InvalidArgumentError):
        lie.sample_perturbation([0.1, 0.1, -0.1, 0, 0, 0], np.random.default_rng(0))


def test_pose_is_immutable():
    p = Pose.identity()
    with pytest.raises(AttributeError):
        p.translation = np.ones(3)
    with pytest.raises(ValueError):
        p.translation[0] = 1.0


@settings(max_examples=200, deadline=None)
@given(twists)
def test_exp_log_round_trip_property(xi):
    xi = small_rotation_twist(xi)
    p = lie.exp(xi)
    np.testing.assert_allclose(lie.exp(lie.log(p)).matrix, p.matrix, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(twists)
def test_exp_matches_matrix_exponential_property(xi):
    np.testing.assert_allclose(lie.exp(xi).matrix, expm_taylor(hat4(xi), terms=80), atol=1e-10)
