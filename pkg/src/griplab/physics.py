"""Minimal rigid-body world: one articulated hand, one object, one floor.

Integration is semi-implicit Euler at 120 Hz with an average-velocity
position update (exact for constant acceleration, so free fall lands on
the closed form). Contacts use kn/cn spring-damper penalties solved
implicitly as a small Gauss-Seidel impulse sweep: a sustained press
converges to force = kn*(depth - slop), while resting contact reaches a
true fixed point instead of the hop cycle an explicit depth-proportional
impulse produces on a 10 g body at 120 Hz (dt*kn*depth/m >> g*dt).

The object's angular state is advanced through its angular momentum, so
an isolated body conserves L to floating-point roundoff regardless of
inertia anisotropy.

Collisions considered: hand capsule vs object, object vs floor. Hand
capsules never collide with each other or the floor by design.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .geometry import quat_integrate, quat_normalize, quat_rotate, quat_to_matrix
from .hand import HandSkeleton, FkResult, clamp_to_limits, collider_world, contact_jacobian, forward_kinematics

GRAVITY = 9.81
PHYSICS_DT = 1.0 / 120.0
SUBSTEPS_PER_FRAME = 4

SHAPE_NAMES = {kernels.SPHERE: "sphere", kernels.CUBE: "cube", kernels.CYLINDER: "cylinder"}
SHAPE_IDS = {v: k for k, v in SHAPE_NAMES.items()}


class SimulationDiverged(RuntimeError):
    """Raised when a step produces non-finite or runaway state."""

    def __init__(self, body: str, detail: str = ""):
        super().__init__(f"simulation diverged at body '{body}' {detail}".strip())
        self.body = body


class ContractViolation(ValueError):
    pass


@dataclass
class PdParams:
    kp: float = 3.0
    kd: float = 0.1
    torque_limit: float = 2.0

    def __post_init__(self):
        if not (self.kp > 0 and self.kd >= 0 and self.torque_limit > 0):
            raise ContractViolation("PdParams require kp > 0, kd >= 0, torque_limit > 0")


@dataclass
class ContactParams:
    kn: float = 5000.0   # N/m
    cn: float = 50.0     # N*s/m
    mu: float = 0.8
    mu_roll: float = 0.10  # floor rolling-resistance coefficient
    iterations: int = 4
    slop: float = 5e-4     # penetration below this draws no restoring force
    v_pushout: float = 0.2  # cap on depth-correction speed, m/s

    def __post_init__(self):
        ok = self.kn > 0 and self.cn >= 0 and self.mu >= 0 and self.mu_roll >= 0
        if not ok or self.iterations < 1 or self.slop < 0 or not self.v_pushout > 0:
            raise ContractViolation("ContactParams out of range")


@dataclass
class ContactPoint:
    collider: int            # hand collider index, -1 for the floor contact
    position: np.ndarray     # (3,) world, on the object surface
    normal: np.ndarray       # (3,) unit, toward the body receiving .force
    depth: float             # m, >= 0
    force: np.ndarray        # (3,) N on the hand collider (or on the object for floor)


@dataclass
class ObjectState:
    shape: int               # kernels.SPHERE / CUBE / CYLINDER
    half_ext: np.ndarray     # (3,) semi-extents m (already scaled)
    pos: np.ndarray
    quat: np.ndarray
    vel: np.ndarray
    omega: np.ndarray
    mass: float = 0.01
    kinematic: bool = False
    ext_force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    ext_torque: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if not self.kinematic and not self.mass > 0:
            raise ContractViolation("dynamic bodies need mass > 0")

    def body_inertia(self) -> np.ndarray:
        """Diagonal body-frame inertia (3,) for the scaled primitive."""
        a, b, c = self.half_ext
        m = self.mass
        if self.shape == kernels.SPHERE:
            return m / 5.0 * np.array([b * b + c * c, a * a + c * c, a * a + b * b])
        if self.shape == kernels.CUBE:
            return m / 3.0 * np.array([b * b + c * c, a * a + c * c, a * a + b * b])
        hz = c
        return np.array(
            [
                m * (3 * b * b + 4 * hz * hz) / 12.0,
                m * (3 * a * a + 4 * hz * hz) / 12.0,
                m * (a * a + b * b) / 4.0,
            ]
        )

    def inv_inertia_world(self) -> np.ndarray:
        if self.kinematic:
            return np.zeros((3, 3))
        R = quat_to_matrix(self.quat)
        return R @ np.diag(1.0 / self.body_inertia()) @ R.T

    def largest_extent(self) -> float:
        """Largest full extent (diameter-like) of the scaled shape."""
        return 2.0 * float(np.max(self.half_ext))


@dataclass
class WorldState:
    skeleton: HandSkeleton
    wrist_pos: np.ndarray
    wrist_quat: np.ndarray
    wrist_vel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    wrist_omega: np.ndarray = field(default_factory=lambda: np.zeros(3))
    wrist_lin_acc: np.ndarray = field(default_factory=lambda: np.zeros(3))
    wrist_ang_acc: np.ndarray = field(default_factory=lambda: np.zeros(3))
    wrist_damping: float = 1.0
    q: np.ndarray = None
    qdot: np.ndarray = None
    qddot: np.ndarray = None
    q_target: np.ndarray = None
    joint_inertia: float = 1e-3   # kg*m^2 per DoF
    obj: ObjectState = None
    floor_z: float = None          # None = no floor
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -GRAVITY]))
    pd: PdParams = field(default_factory=PdParams)
    contact: ContactParams = field(default_factory=ContactParams)
    step_count: int = 0
    fk: FkResult = None
    joint_vel: np.ndarray = None   # (17,3) world, last-substep finite difference
    contacts: list = field(default_factory=list)

    def __post_init__(self):
        n = len(self.skeleton.dof_names)
        if self.q is None:
            self.q = np.zeros(n)
        if self.qdot is None:
            self.qdot = np.zeros(n)
        if self.qddot is None:
            self.qddot = np.zeros(n)
        if self.q_target is None:
            self.q_target = self.q.copy()
        if self.fk is None:
            self.fk = forward_kinematics(self.skeleton, self.wrist_pos, self.wrist_quat, self.q)
        if self.joint_vel is None:
            self.joint_vel = np.zeros((len(self.skeleton.joint_names), 3))


def pd_torques(q, qdot, q_target, params: PdParams) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    qdot = np.asarray(qdot, dtype=np.float64)
    q_target = np.asarray(q_target, dtype=np.float64)
    if not (q.shape == qdot.shape == q_target.shape):
        raise ContractViolation("pd_torques: q, qdot, q_target length mismatch")
    tau = params.kp * (q_target - q) - params.kd * qdot
    return np.clip(tau, -params.torque_limit, params.torque_limit)


def closest_point_on_object(point: np.ndarray, obj: ObjectState):
    """Surface point and outward unit normal nearest to a world-space query."""
    pts, nrm, _ = kernels.closest_points(
        obj.shape, obj.half_ext, obj.pos, obj.quat, np.asarray(point, dtype=np.float64)[None, :]
    )
    return pts[0], nrm[0]


def _floor_support_points(obj: ObjectState, floor_z: float):
    """World points of the object at or below the floor plane, with depths."""
    R = quat_to_matrix(obj.quat)
    e = obj.half_ext
    candidates = []
    if obj.shape == kernels.CUBE:
        for sx in (-1.0, 1.0):
            for sy in (-1.0, 1.0):
                for sz in (-1.0, 1.0):
                    candidates.append(np.array([sx * e[0], sy * e[1], sz * e[2]]))
    elif obj.shape == kernels.SPHERE:
        dl = R.T @ np.array([0.0, 0.0, -1.0])
        v = e * e * dl
        nv = np.linalg.norm(e * dl)
        if nv > 1e-12:
            candidates.append(v / nv)
    else:
        a, b, hz = e
        dl = R.T @ np.array([0.0, 0.0, -1.0])
        nxy = np.hypot(a * dl[0], b * dl[1])
        if nxy > 1e-9:
            base = np.arctan2(b * dl[1] / nxy, a * dl[0] / nxy)
        else:
            base = 0.0
        for s in (-1.0, 1.0):
            for k in range(4):
                th = base + k * np.pi / 2.0
                candidates.append(np.array([a * np.cos(th), b * np.sin(th), s * hz]))
    pts = obj.pos[None, :] + np.array(candidates) @ R.T
    out = []
    for p in pts:
        depth = floor_z - p[2]
        if depth > 0.0:
            out.append((p, depth))
    return out


def _detect_contacts(world: WorldState):
    """Collect penetrating hand-object and object-floor pairs.

    Returns parallel arrays for the sweep kernel plus per-contact collider
    ids. Normals point toward the impulse-receiving body: toward the hand
    for hand contacts, toward the object (+z) for floor contacts.
    """
    sk = world.skeleton
    obj = world.obj
    colliders, sides, xs, ns, depths = [], [], [], [], []
    if obj is not None:
        p0, p1 = collider_world(sk, world.fk, world.wrist_pos, world.wrist_quat)
        reject = float(np.max(sk.collider_radius)) + 0.002
        _, pts, nrms, sds = kernels.capsule_closest(
            obj.shape, obj.half_ext, obj.pos, obj.quat, p0, p1, reject
        )
        for c in range(len(sk.collider_radius)):
            depth = sk.collider_radius[c] - sds[c]
            if depth > 0.0:
                colliders.append(c)
                sides.append(0)
                xs.append(pts[c])
                ns.append(nrms[c])
                depths.append(depth)
        if world.floor_z is not None and not obj.kinematic:
            for p, depth in _floor_support_points(obj, world.floor_z):
                colliders.append(-1)
                sides.append(1)
                xs.append(p)
                ns.append(np.array([0.0, 0.0, 1.0]))
                depths.append(depth)
    return colliders, sides, xs, ns, depths


def _check_finite(world: WorldState):
    def bad(x):
        return not np.all(np.isfinite(x)) or np.any(np.abs(x) > 1e5)

    if bad(world.q) or bad(world.qdot):
        raise SimulationDiverged("hand")
    if bad(world.wrist_pos) or bad(world.wrist_vel):
        raise SimulationDiverged("wrist")
    if world.obj is not None and (bad(world.obj.pos) or bad(world.obj.vel) or bad(world.obj.omega)):
        raise SimulationDiverged("object")


def step_physics(world: WorldState, dt: float = PHYSICS_DT) -> WorldState:
    """Advance one substep; returns a new WorldState, input untouched."""
    if not dt > 0:
        raise ContractViolation("dt must be positive")
    sk = world.skeleton
    obj = world.obj

    q0 = world.q
    qdot0 = world.qdot

    tau = pd_torques(q0, qdot0, world.q_target, world.pd)
    qdot = qdot0 + dt * tau / world.joint_inertia

    wrist_vel = world.wrist_damping * (world.wrist_vel + dt * world.wrist_lin_acc)
    wrist_omega = world.wrist_damping * (world.wrist_omega + dt * world.wrist_ang_acc)

    if obj is not None and not obj.kinematic:
        v_obj = obj.vel + dt * (world.gravity + obj.ext_force / obj.mass)
        iinv = obj.inv_inertia_world()
        inv_mass = 1.0 / obj.mass
        L = np.diag(obj.body_inertia()) @ (quat_to_matrix(obj.quat).T @ obj.omega)
        L = quat_to_matrix(obj.quat) @ L + dt * obj.ext_torque
        omega_obj = iinv @ L
    else:
        v_obj = obj.vel.copy() if obj is not None else np.zeros(3)
        omega_obj = obj.omega.copy() if obj is not None else np.zeros(3)
        iinv = np.zeros((3, 3))
        inv_mass = 0.0

    colliders, sides, xs, ns, depths = _detect_contacts(world)
    contacts = []
    if colliders:
        C = len(colliders)
        D = len(q0)
        jac = np.zeros((C, D, 3))
        base_vel = np.zeros((C, 3))
        for i, c in enumerate(colliders):
            if sides[i] == 0:
                jac[i] = contact_jacobian(sk, world.fk, c, xs[i])
                base_vel[i] = wrist_vel + np.cross(wrist_omega, xs[i] - world.wrist_pos)
        qdot, v_obj, omega_obj, imp, jn = kernels.contact_sweep(
            dt,
            world.contact.kn,
            world.contact.cn,
            world.contact.mu,
            world.contact.iterations,
            world.contact.slop,
            world.contact.v_pushout,
            qdot,
            np.full(D, 1.0 / world.joint_inertia),
            v_obj,
            omega_obj,
            inv_mass,
            iinv,
            obj.pos,
            np.array(sides, dtype=np.uint8),
            np.array(xs),
            np.array(ns),
            np.array(depths),
            jac,
            base_vel,
        )
        # rolling resistance against the desk: friction alone leaves pure
        # rolling undamped, so a tipped shape would wander forever
        if obj is not None and not obj.kinematic and world.contact.mu_roll > 0.0:
            for i in range(len(colliders)):
                if sides[i] != 1 or jn[i] <= 0.0:
                    continue
                wmag = float(np.linalg.norm(omega_obj))
                if wmag < 1e-9:
                    break
                lever = float(np.linalg.norm(xs[i] - obj.pos))
                dw = iinv @ (omega_obj * (world.contact.mu_roll * lever * jn[i] / wmag))
                dmag = float(np.linalg.norm(dw))
                if dmag > wmag:
                    dw *= wmag / dmag
                omega_obj = omega_obj - dw
                # damp the about-contact rotation mode, not a free CoM torque:
                # the matching linear change keeps the contact-point velocity
                # untouched, otherwise friction reads the mismatch as slip and
                # converts it into steady thrust that walks resting bodies
                # across the desk
                v_obj = v_obj + np.cross(dw, xs[i] - obj.pos)

        for i, c in enumerate(colliders):
            contacts.append(
                ContactPoint(
                    collider=c,
                    position=np.array(xs[i]),
                    normal=np.array(ns[i]),
                    depth=float(depths[i]),
                    force=imp[i] / dt,
                )
            )

    # integrate positions with average velocity (exact under constant accel)
    q_new = q0 + dt * 0.5 * (qdot0 + qdot)
    q_clamped = clamp_to_limits(sk, q_new)
    at_lo = q_clamped <= sk.dof_limits[:, 0]
    at_hi = q_clamped >= sk.dof_limits[:, 1]
    qdot = np.where((at_lo & (qdot < 0)) | (at_hi & (qdot > 0)), 0.0, qdot)

    wrist_pos = world.wrist_pos + dt * wrist_vel
    wrist_quat = quat_integrate(world.wrist_quat, wrist_omega, dt)

    new_obj = obj
    if obj is not None and not obj.kinematic:
        pos = obj.pos + dt * 0.5 * (obj.vel + v_obj)
        R_old = quat_to_matrix(obj.quat)
        L_final = R_old @ (np.diag(obj.body_inertia()) @ (R_old.T @ omega_obj))
        quat = quat_integrate(obj.quat, omega_obj, dt)
        R_new = quat_to_matrix(quat)
        omega_final = R_new @ ((R_new.T @ L_final) / obj.body_inertia())
        new_obj = replace(obj, pos=pos, quat=quat, vel=v_obj, omega=omega_final)
    elif obj is not None:
        new_obj = replace(obj)

    fk_new = forward_kinematics(sk, wrist_pos, wrist_quat, q_clamped)
    joint_vel = (fk_new.joint_pos - world.fk.joint_pos) / dt

    out = replace(
        world,
        wrist_pos=wrist_pos,
        wrist_quat=quat_normalize(wrist_quat),
        wrist_vel=wrist_vel,
        wrist_omega=wrist_omega,
        q=q_clamped,
        qdot=qdot,
        qddot=(qdot - qdot0) / dt,
        obj=new_obj,
        step_count=world.step_count + 1,
        fk=fk_new,
        joint_vel=joint_vel,
        contacts=contacts,
    )
    _check_finite(out)
    return out


def world_to_json(world: WorldState) -> str:
    doc = {
        "version": 1,
        "wrist": {
            "pos": world.wrist_pos.tolist(),
            "quat": world.wrist_quat.tolist(),
            "vel": world.wrist_vel.tolist(),
            "omega": world.wrist_omega.tolist(),
        },
        "q": world.q.tolist(),
        "qdot": world.qdot.tolist(),
        "q_target": world.q_target.tolist(),
        "floor_z": world.floor_z,
        "step_count": world.step_count,
        "object": None,
    }
    if world.obj is not None:
        o = world.obj
        doc["object"] = {
            "shape": SHAPE_NAMES[o.shape],
            "half_ext": o.half_ext.tolist(),
            "pos": o.pos.tolist(),
            "quat": o.quat.tolist(),
            "vel": o.vel.tolist(),
            "omega": o.omega.tolist(),
            "mass": o.mass,
            "kinematic": o.kinematic,
        }
    return json.dumps(doc)


def world_from_json(text: str, skeleton: HandSkeleton) -> WorldState:
    doc = json.loads(text)
    if doc.get("version") != 1:
        raise ValueError(f"unsupported world snapshot version {doc.get('version')!r}")
    obj = None
    if doc["object"] is not None:
        od = doc["object"]
        obj = ObjectState(
            shape=SHAPE_IDS[od["shape"]],
            half_ext=np.array(od["half_ext"]),
            pos=np.array(od["pos"]),
            quat=np.array(od["quat"]),
            vel=np.array(od["vel"]),
            omega=np.array(od["omega"]),
            mass=od["mass"],
            kinematic=od["kinematic"],
        )
    w = doc["wrist"]
    return WorldState(
        skeleton=skeleton,
        wrist_pos=np.array(w["pos"]),
        wrist_quat=np.array(w["quat"]),
        wrist_vel=np.array(w["vel"]),
        wrist_omega=np.array(w["omega"]),
        q=np.array(doc["q"]),
        qdot=np.array(doc["qdot"]),
        q_target=np.array(doc["q_target"]),
        obj=obj,
        floor_z=doc["floor_z"],
        step_count=doc["step_count"],
    )
