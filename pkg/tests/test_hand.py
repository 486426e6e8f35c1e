"""Forward kinematics against an independent homogeneous-transform oracle.

The oracle composes 4x4 matrices straight from the skeleton tables using
Rodrigues rotation matrices, sharing no code with the package FK.
"""
import numpy as np
import pytest

from griplab.hand import (
    HandState,
    clamp_to_limits,
    collider_world,
    contact_jacobian,
    default_skeleton,
    forward_kinematics,
    query_points_world,
)


def rodrigues(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(axis)
    if n < 1e-15:
        return np.eye(3)
    k = axis / n
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(angle) * kx + (1 - np.cos(angle)) * (kx @ kx)


def quat_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def oracle_fk(skel, wrist_pos, wrist_quat, q):
    """Reference joint/tip positions via explicit matrix chains."""
    n = len(skel.parents)
    pos = np.zeros((n, 3))
    rot = np.zeros((n, 3, 3))
    for j in range(n):
        par = skel.parents[j]
        if par < 0:
            p_par, r_par = np.asarray(wrist_pos, dtype=np.float64), quat_matrix(wrist_quat)
        else:
            p_par, r_par = pos[par], rot[par]
        p = p_par + r_par @ skel.offsets[j]
        r = r_par @ quat_matrix(skel.rest_quat[j])
        for d in range(len(skel.dof_joint)):
            if skel.dof_joint[d] == j:
                r = r @ rodrigues(skel.dof_axis[d], q[d])
        pos[j], rot[j] = p, r
    tips = np.zeros((len(skel.tip_parent), 3))
    for i, j in enumerate(skel.tip_parent):
        tips[i] = pos[j] + rot[j] @ skel.tip_offset[i]
    return pos, rot, tips


def random_pose(skel, rng):
    wrist_pos = rng.uniform(-1, 1, 3)
    ax = rng.standard_normal(3)
    ax /= np.linalg.norm(ax)
    ang = rng.uniform(0, 2 * np.pi)
    wq = np.concatenate([[np.cos(ang / 2)], np.sin(ang / 2) * ax])
    q = rng.uniform(skel.dof_limits[:, 0], skel.dof_limits[:, 1])
    return wrist_pos, wq, q


N_DOF = 23


def test_fk_matches_matrix_chain_oracle(skel):
    # acceptance: 1e-9 m on 1000 random poses
    rng = np.random.default_rng(123)
    worst = 0.0
    for _ in range(1000):
        wp, wq, q = random_pose(skel, rng)
        fk = forward_kinematics(skel, wp, wq, q)
        opos, orot, otips = oracle_fk(skel, wp, wq, q)
        worst = max(
            worst,
            float(np.abs(fk.joint_pos - opos).max()),
            float(np.abs(fk.tip_pos - otips).max()),
        )
    print(f"fk vs oracle worst abs err: {worst:.3e}")
    assert worst < 1e-9


def test_fk_rest_pose_matches_table(skel):
    # rest_joint_pos stacks joints then tips, derived once at build time
    fk = forward_kinematics(skel, np.zeros(3), np.array([1.0, 0, 0, 0]), np.zeros(N_DOF))
    stacked = np.concatenate([fk.joint_pos, fk.tip_pos], axis=0)
    np.testing.assert_allclose(stacked, skel.rest_joint_pos, atol=1e-12)


def test_fk_rigid_translation_invariance(skel):
    rng = np.random.default_rng(7)
    _, wq, q = random_pose(skel, rng)
    t = np.array([0.3, -0.2, 0.11])
    a = forward_kinematics(skel, np.zeros(3), wq, q)
    b = forward_kinematics(skel, t, wq, q)
    np.testing.assert_allclose(b.joint_pos, a.joint_pos + t, atol=1e-12)
    np.testing.assert_allclose(b.tip_pos, a.tip_pos + t, atol=1e-12)


def test_fk_wrist_rotation_maps_points(skel):
    rng = np.random.default_rng(8)
    _, wq, q = random_pose(skel, rng)
    a = forward_kinematics(skel, np.zeros(3), np.array([1.0, 0, 0, 0]), q)
    b = forward_kinematics(skel, np.zeros(3), wq, q)
    np.testing.assert_allclose(b.joint_pos, a.joint_pos @ quat_matrix(wq).T, atol=1e-12)


def test_fk_rejects_wrong_q_shape(skel):
    with pytest.raises(ValueError):
        forward_kinematics(skel, np.zeros(3), np.array([1.0, 0, 0, 0]), np.zeros(7))


def test_clamp_to_limits_idempotent_and_bounded(skel):
    rng = np.random.default_rng(3)
    q = rng.uniform(-4, 4, N_DOF)
    c = clamp_to_limits(skel, q)
    assert (c >= skel.dof_limits[:, 0] - 1e-15).all()
    assert (c <= skel.dof_limits[:, 1] + 1e-15).all()
    np.testing.assert_array_equal(clamp_to_limits(skel, c), c)


def test_query_points_world_count_and_palm_marker(skel):
    fk = forward_kinematics(skel, np.zeros(3), np.array([1.0, 0, 0, 0]), np.zeros(N_DOF))
    pts = query_points_world(skel, fk, np.zeros(3), np.array([1.0, 0, 0, 0]))
    assert pts.shape == (23, 3)
    np.testing.assert_allclose(pts[-1], skel.palm_marker, atol=1e-12)


def test_collider_world_segments_finite(skel):
    rng = np.random.default_rng(5)
    wp, wq, q = random_pose(skel, rng)
    fk = forward_kinematics(skel, wp, wq, q)
    p0, p1 = collider_world(skel, fk, wp, wq)
    assert p0.shape == p1.shape == (skel.collider_joint.shape[0], 3)
    assert (skel.collider_radius > 0).all()
    assert np.isfinite(p0).all() and np.isfinite(p1).all()
    # palm capsules (joint index -1) ride the wrist frame rigidly
    palm_rows = np.flatnonzero(skel.collider_joint < 0)
    assert palm_rows.size == 4
    R = quat_matrix(wq)
    np.testing.assert_allclose(
        p0[palm_rows], wp + skel.collider_p0[palm_rows] @ R.T, atol=1e-12
    )


def test_contact_jacobian_matches_finite_difference(skel):
    # row d = d(point)/d(q_d) for a point rigidly attached to the collider's joint
    rng = np.random.default_rng(11)
    wp, wq, q = random_pose(skel, rng)
    fk = forward_kinematics(skel, wp, wq, q)
    for cidx in [0, 4, 9, 14]:
        joint = skel.collider_joint[cidx]
        point = fk.joint_pos[joint] + rng.normal(scale=0.01, size=3)
        jac = contact_jacobian(skel, fk, cidx, point)
        local = quat_matrix(fk.joint_quat[joint]).T @ (point - fk.joint_pos[joint])
        eps = 1e-7
        for d in range(N_DOF):
            qp, qm = q.copy(), q.copy()
            qp[d] += eps
            qm[d] -= eps
            fkp = forward_kinematics(skel, wp, wq, qp)
            fkm = forward_kinematics(skel, wp, wq, qm)
            pp = fkp.joint_pos[joint] + quat_matrix(fkp.joint_quat[joint]) @ local
            pm = fkm.joint_pos[joint] + quat_matrix(fkm.joint_quat[joint]) @ local
            np.testing.assert_allclose(jac[d], (pp - pm) / (2 * eps), atol=1e-5)


def test_hand_state_validates_shapes(skel):
    with pytest.raises(Exception):
        HandState(
            wrist_pos=np.zeros(3),
            wrist_quat=np.array([1.0, 0, 0, 0]),
            wrist_vel=np.zeros(3),
            wrist_omega=np.zeros(3),
            q=np.zeros(23),
            qdot=np.zeros(23),
            qddot=np.zeros(23),
            joint_pos=np.zeros((5, 3)),
            joint_vel=np.zeros((17, 3)),
        )
