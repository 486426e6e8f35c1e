"""Mechanical sanity checks: ballistic motion, resting contact,
conservation laws, friction cone, and stepping contracts."""
import numpy as np
import pytest

from griplab import kernels
from griplab.geometry import quat_rotate
from griplab.hand import default_skeleton
from griplab.physics import (
    GRAVITY,
    PHYSICS_DT,
    ContactParams,
    ContractViolation,
    ObjectState,
    PdParams,
    WorldState,
    pd_torques,
    step_physics,
    world_from_json,
    world_to_json,
)

from conftest import random_object

FAR = np.array([0.0, 0.0, 10.0])  # keeps the hand out of contact range


def make_world(skel, obj=None, floor_z=None, **kw):
    return WorldState(
        skeleton=skel,
        wrist_pos=FAR.copy(),
        wrist_quat=np.array([1.0, 0, 0, 0]),
        obj=obj,
        floor_z=floor_z,
        **kw,
    )


def test_free_fall_half_second(skel):
    # acceptance: 0.5 s drop within 1% of g t^2 / 2
    obj = ObjectState(
        shape=kernels.SPHERE,
        half_ext=np.full(3, 0.03),
        pos=np.zeros(3),
        quat=np.array([1.0, 0, 0, 0]),
        vel=np.zeros(3),
        omega=np.zeros(3),
    )
    world = make_world(skel, obj)
    steps = int(round(0.5 / PHYSICS_DT))
    for _ in range(steps):
        world = step_physics(world)
    expected = 0.5 * GRAVITY * 0.5**2
    drop = -world.obj.pos[2]
    rel = abs(drop - expected) / expected
    print(f"free fall drop {drop:.4f} m vs {expected:.4f} m (rel {rel:.2e})")
    assert rel < 0.01


def test_resting_penetration_under_5mm(skel):
    rng = np.random.default_rng(4)
    for shape in (kernels.SPHERE, kernels.CUBE, kernels.CYLINDER):
        obj = random_object(rng, shape=shape)
        obj.pos = np.array([0.0, 0.0, float(obj.half_ext.max()) + 0.02])
        obj.quat = np.array([1.0, 0, 0, 0])
        world = make_world(skel, obj, floor_z=0.0)
        for _ in range(120):
            world = step_physics(world)
        # lowest support point must not sink more than 5 mm below the floor
        pts = surface_low_points(world.obj)
        depth = -(pts[:, 2].min())
        assert depth < 0.005, (shape, depth)


def surface_low_points(obj):
    rng = np.random.default_rng(0)
    u = rng.standard_normal((4096, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    if obj.shape == kernels.SPHERE:
        local = u * obj.half_ext
    elif obj.shape == kernels.CUBE:
        local = np.sign(u) * obj.half_ext
    else:
        xy = u[:, :2] / np.maximum(np.linalg.norm(u[:, :2], axis=1, keepdims=True), 1e-12)
        local = np.column_stack(
            [xy[:, 0] * obj.half_ext[0], xy[:, 1] * obj.half_ext[1], np.sign(u[:, 2]) * obj.half_ext[2]]
        )
    return obj.pos + np.array([quat_rotate(obj.quat, p) for p in local])


def test_isolated_body_momentum_conserved_without_gravity(skel):
    rng = np.random.default_rng(9)
    obj = random_object(rng)
    obj.vel = rng.uniform(-1, 1, 3)
    obj.omega = rng.uniform(-3, 3, 3)
    world = make_world(skel, obj)
    world = WorldState(**{**world.__dict__, "gravity": np.zeros(3), "fk": None, "joint_vel": None})
    p0 = obj.mass * obj.vel
    for _ in range(200):
        prev_p = world.obj.mass * world.obj.vel
        world = step_physics(world)
        p = world.obj.mass * world.obj.vel
        assert np.abs(p - prev_p).max() < 1e-9
    np.testing.assert_allclose(world.obj.mass * world.obj.vel, p0, atol=1e-9)


def test_isolated_body_angular_momentum_conserved(skel):
    rng = np.random.default_rng(19)
    obj = random_object(rng, shape=kernels.CUBE)
    obj.omega = rng.uniform(-4, 4, 3)
    world = make_world(skel, obj)
    world = WorldState(**{**world.__dict__, "gravity": np.zeros(3), "fk": None, "joint_vel": None})

    def ang_mom(o):
        R = np.eye(3)
        from griplab.geometry import quat_to_matrix

        R = quat_to_matrix(o.quat)
        I = R @ np.diag(o.body_inertia()) @ R.T
        return I @ o.omega

    L0 = ang_mom(world.obj)
    for _ in range(200):
        prev = ang_mom(world.obj)
        world = step_physics(world)
        cur = ang_mom(world.obj)
        assert np.abs(cur - prev).max() < 1e-9
    np.testing.assert_allclose(ang_mom(world.obj), L0, atol=1e-7)


def test_coulomb_cone_never_violated(skel):
    # acceptance: |ft| <= mu*jn over 1e5 random contact substeps
    rng = np.random.default_rng(31)
    checked = 0
    trial = 0
    while checked < 100_000:
        trial += 1
        obj = random_object(rng)
        obj.pos = np.array(
            [rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02), float(obj.half_ext.max()) * rng.uniform(0.6, 1.2)]
        )
        obj.vel = rng.uniform(-0.5, 0.5, 3)
        obj.omega = rng.uniform(-5, 5, 3)
        world = make_world(skel, obj, floor_z=0.0)
        for _ in range(30):
            world = step_physics(world)
            for c in world.contacts:
                fn = float(np.dot(c.force, c.normal))
                ft = float(np.linalg.norm(c.force - fn * c.normal))
                assert fn >= -1e-9, (trial, fn)
                assert ft <= world.contact.mu * fn + 1e-9, (trial, ft, world.contact.mu * fn)
                checked += 1
    print(f"friction cone held on {checked} contact impulses")


def test_kinematic_object_ignores_impulses(skel):
    obj = ObjectState(
        shape=kernels.CUBE,
        half_ext=np.full(3, 0.025),
        pos=np.array([0.0, 0.0, 0.01]),
        quat=np.array([1.0, 0, 0, 0]),
        vel=np.zeros(3),
        omega=np.zeros(3),
        kinematic=True,
    )
    world = make_world(skel, obj, floor_z=0.0)
    for _ in range(60):
        world = step_physics(world)
    np.testing.assert_array_equal(world.obj.pos, np.array([0.0, 0.0, 0.01]))
    np.testing.assert_array_equal(world.obj.vel, np.zeros(3))


def test_hand_object_contacts_reported_for_kinematic_object(skel):
    # pinned object still produces contact records so stabilization can sense it
    obj = ObjectState(
        shape=kernels.SPHERE,
        half_ext=np.full(3, 0.04),
        pos=np.array([0.05, 0.0, -0.05]),
        quat=np.array([1.0, 0, 0, 0]),
        vel=np.zeros(3),
        omega=np.zeros(3),
        kinematic=True,
    )
    world = WorldState(
        skeleton=skel,
        wrist_pos=np.zeros(3),
        wrist_quat=np.array([1.0, 0, 0, 0]),
        obj=obj,
        q_target=np.full(23, 1.2),
    )
    seen = 0
    for _ in range(120):
        world = step_physics(world)
        seen += len([c for c in world.contacts if c.collider >= 0])
    assert seen > 0
    np.testing.assert_array_equal(world.obj.pos, obj.pos)


def test_pd_torque_formula():
    p = PdParams(kp=2.0, kd=0.0, torque_limit=10.0)
    tau = pd_torques(np.array([0.0]), np.array([0.0]), np.array([0.1]), p)
    assert abs(tau[0] - 0.2) < 1e-12
    p = PdParams(kp=100.0, kd=0.0, torque_limit=5.0)
    tau = pd_torques(np.array([0.0]), np.array([0.0]), np.array([1.0]), p)
    assert abs(tau[0] - 5.0) < 1e-12  # clamped
    p = PdParams(kp=3.0, kd=0.5, torque_limit=10.0)
    tau = pd_torques(np.array([0.2]), np.array([1.0]), np.array([0.2]), p)
    assert abs(tau[0] + 0.5) < 1e-12  # pure damping


def test_pd_params_validated():
    with pytest.raises(ContractViolation):
        PdParams(kp=0.0)
    with pytest.raises(ContractViolation):
        PdParams(kd=-1.0)


def test_step_rejects_nonpositive_dt(skel):
    world = make_world(skel)
    with pytest.raises(ContractViolation):
        step_physics(world, dt=0.0)


def test_step_determinism(skel):
    rng = np.random.default_rng(77)
    obj = random_object(rng)
    obj.pos = np.array([0.05, 0.0, 0.05])
    obj.vel = rng.uniform(-0.3, 0.3, 3)

    def advance():
        w = WorldState(
            skeleton=skel,
            wrist_pos=np.zeros(3),
            wrist_quat=np.array([1.0, 0, 0, 0]),
            obj=ObjectState(**{**obj.__dict__}),
            floor_z=-0.1,
            q_target=np.full(23, 0.8),
        )
        for _ in range(90):
            w = step_physics(w)
        return w

    a, b = advance(), advance()
    assert world_to_json(a) == world_to_json(b)


def test_world_json_round_trip(skel):
    rng = np.random.default_rng(13)
    obj = random_object(rng)
    world = WorldState(
        skeleton=skel,
        wrist_pos=rng.uniform(-0.1, 0.1, 3),
        wrist_quat=np.array([1.0, 0, 0, 0]),
        obj=obj,
        floor_z=-0.2,
        q=rng.uniform(0, 1, 23),
    )
    for _ in range(10):
        world = step_physics(world)
    text = world_to_json(world)
    back = world_from_json(text, skel)
    assert world_to_json(back) == text
    np.testing.assert_array_equal(back.q, world.q)
    np.testing.assert_array_equal(back.obj.pos, world.obj.pos)


def test_rolling_resistance_damps_floor_tumble(skel):
    # a spun ellipsoid on the desk must shed angular speed
    obj = ObjectState(
        shape=kernels.SPHERE,
        half_ext=np.array([0.04, 0.02, 0.03]),
        pos=np.array([0.0, 0.0, 0.021]),
        quat=np.array([1.0, 0, 0, 0]),
        vel=np.zeros(3),
        omega=np.array([0.0, 8.0, 0.0]),
    )
    world = make_world(skel, obj, floor_z=0.0)
    for _ in range(240):
        world = step_physics(world)
    final = float(np.linalg.norm(world.obj.omega))
    assert final < 2.0, final


def test_rolling_resistance_never_reverses_spin(skel):
    obj = ObjectState(
        shape=kernels.SPHERE,
        half_ext=np.full(3, 0.03),
        pos=np.array([0.0, 0.0, 0.03]),
        quat=np.array([1.0, 0, 0, 0]),
        vel=np.zeros(3),
        omega=np.array([0.0, 0.5, 0.0]),
    )
    world = make_world(skel, obj, floor_z=0.0)
    sign0 = np.sign(obj.omega[1])
    for _ in range(400):
        world = step_physics(world)
        wy = world.obj.omega[1]
        if abs(wy) < 1e-6:
            break
        assert np.sign(wy) == sign0


def test_joint_limits_respected_under_pd(skel):
    world = WorldState(
        skeleton=skel,
        wrist_pos=FAR.copy(),
        wrist_quat=np.array([1.0, 0, 0, 0]),
        q_target=np.full(23, 10.0),  # way past the upper limits
    )
    for _ in range(300):
        world = step_physics(world)
    assert (world.q <= skel.dof_limits[:, 1] + 1e-12).all()
    assert (world.q >= skel.dof_limits[:, 0] - 1e-12).all()


def test_contact_params_rejects_bad_values():
    with pytest.raises(ContractViolation):
        ContactParams(kn=-1.0)
    with pytest.raises(ContractViolation):
        ContactParams(mu=-0.5)
