"""Articulated right-hand model: 17 joints, 23 DoF, 19 capsule colliders.

Conventions: wrist frame has fingers along +x, y to the left (pinky side),
z out of the back of the hand, so the palm faces -z. All offsets are in
meters, expressed in the parent joint frame at zero pose. The joint list
is topologically ordered (parents precede children).

DoF layout: four fingers carry MCP abduction+flexion, PIP flexion, DIP
flexion (16); the thumb carries CMC abduction+flexion, MCP
abduction+flexion, IP flexion (5); two 1-DoF palm arch joints let the
ring/pinky columns cup (2). Flexion is a rotation about local +y, which
curls toward the palm; abduction is about local +z.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .geometry import quat_from_axis_angle, quat_mul, quat_rotate, quat_to_matrix_batch

N_JOINTS = 17
N_DOF = 23
N_COLLIDERS = 19
N_TIPS = 5
N_LVS_COLLIDERS = 15  # finger capsules; palm capsules carry no local voxel sensor


@dataclass
class HandSkeleton:
    """Packed, immutable skeleton description shared by all worlds."""

    joint_names: list
    parents: np.ndarray          # (J,) int32, -1 = wrist
    offsets: np.ndarray          # (J,3)
    rest_quat: np.ndarray        # (J,4) fixed pre-rotation (thumb chain)
    dof_names: list
    dof_joint: np.ndarray        # (D,) int32
    dof_axis: np.ndarray         # (D,3) local axes
    dof_limits: np.ndarray       # (D,2) [lo, hi] rad
    joint_dof_start: np.ndarray  # (J,) int32
    joint_dof_count: np.ndarray  # (J,) int32
    tip_parent: np.ndarray       # (T,) int32
    tip_offset: np.ndarray       # (T,3)
    collider_joint: np.ndarray   # (C,) int32, -1 = wrist-attached palm capsule
    collider_p0: np.ndarray      # (C,3) local endpoints
    collider_p1: np.ndarray      # (C,3)
    collider_radius: np.ndarray  # (C,)
    palm_marker: np.ndarray      # (3,) extra closest-point query, wrist frame
    dof_ancestor_mask: np.ndarray = field(default=None)  # (C,D) bool, derived
    rest_joint_pos: np.ndarray = field(default=None)     # (J+T,3), derived

    def __post_init__(self):
        assert len(self.joint_names) == N_JOINTS
        assert self.dof_joint.shape[0] == N_DOF
        assert self.collider_joint.shape[0] == N_COLLIDERS
        assert np.all(self.parents < np.arange(N_JOINTS)), "joints must be parent-first"
        if self.dof_ancestor_mask is None:
            self.dof_ancestor_mask = self._build_ancestor_mask()
        if self.rest_joint_pos is None:
            fk = forward_kinematics(self, np.zeros(3), np.array([1.0, 0, 0, 0]), np.zeros(N_DOF))
            self.rest_joint_pos = np.concatenate([fk.joint_pos, fk.tip_pos], axis=0)

    def _build_ancestor_mask(self) -> np.ndarray:
        mask = np.zeros((N_COLLIDERS, N_DOF), dtype=bool)
        for c in range(N_COLLIDERS):
            j = self.collider_joint[c]
            while j >= 0:
                s = self.joint_dof_start[j]
                mask[c, s : s + self.joint_dof_count[j]] = True
                j = self.parents[j]
        return mask

    def to_json(self) -> str:
        doc = {
            "version": 1,
            "joints": [
                {
                    "name": self.joint_names[j],
                    "parent": int(self.parents[j]),
                    "offset": self.offsets[j].tolist(),
                    "rest_quat": self.rest_quat[j].tolist(),
                }
                for j in range(N_JOINTS)
            ],
            "dofs": [
                {
                    "name": self.dof_names[d],
                    "joint": int(self.dof_joint[d]),
                    "axis": self.dof_axis[d].tolist(),
                    "limits": self.dof_limits[d].tolist(),
                }
                for d in range(N_DOF)
            ],
            "tips": [
                {"parent": int(self.tip_parent[t]), "offset": self.tip_offset[t].tolist()}
                for t in range(N_TIPS)
            ],
            "colliders": [
                {
                    "joint": int(self.collider_joint[c]),
                    "p0": self.collider_p0[c].tolist(),
                    "p1": self.collider_p1[c].tolist(),
                    "radius": float(self.collider_radius[c]),
                }
                for c in range(N_COLLIDERS)
            ],
            "palm_marker": self.palm_marker.tolist(),
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "HandSkeleton":
        doc = json.loads(text)
        if doc.get("version") != 1:
            raise ValueError(f"unsupported skeleton version {doc.get('version')!r}")
        joints = doc["joints"]
        dofs = doc["dofs"]
        dof_joint = np.array([d["joint"] for d in dofs], dtype=np.int32)
        start = np.zeros(len(joints), dtype=np.int32)
        count = np.zeros(len(joints), dtype=np.int32)
        for i, j in enumerate(dof_joint):
            if count[j] == 0:
                start[j] = i
            count[j] += 1
        return cls(
            joint_names=[j["name"] for j in joints],
            parents=np.array([j["parent"] for j in joints], dtype=np.int32),
            offsets=np.array([j["offset"] for j in joints]),
            rest_quat=np.array([j["rest_quat"] for j in joints]),
            dof_names=[d["name"] for d in dofs],
            dof_joint=dof_joint,
            dof_axis=np.array([d["axis"] for d in dofs]),
            dof_limits=np.array([d["limits"] for d in dofs]),
            joint_dof_start=start,
            joint_dof_count=count,
            tip_parent=np.array([t["parent"] for t in doc["tips"]], dtype=np.int32),
            tip_offset=np.array([t["offset"] for t in doc["tips"]]),
            collider_joint=np.array([c["joint"] for c in doc["colliders"]], dtype=np.int32),
            collider_p0=np.array([c["p0"] for c in doc["colliders"]]),
            collider_p1=np.array([c["p1"] for c in doc["colliders"]]),
            collider_radius=np.array([c["radius"] for c in doc["colliders"]]),
            palm_marker=np.array(doc["palm_marker"]),
        )


@dataclass
class FkResult:
    joint_pos: np.ndarray    # (J,3) world
    joint_quat: np.ndarray   # (J,4)
    tip_pos: np.ndarray      # (T,3)
    dof_origin: np.ndarray   # (D,3)
    dof_axis_w: np.ndarray   # (D,3)


def forward_kinematics(skel: HandSkeleton, wrist_pos, wrist_quat, q) -> FkResult:
    """World-frame joint/tip positions and per-DoF rotation axes."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (N_DOF,):
        raise ValueError(f"q must have shape ({N_DOF},), got {q.shape}")
    out = kernels.fk_hand(
        skel.parents,
        skel.offsets,
        skel.rest_quat,
        skel.dof_axis,
        skel.joint_dof_start,
        skel.joint_dof_count,
        skel.tip_parent,
        skel.tip_offset,
        np.asarray(wrist_pos, dtype=np.float64),
        np.asarray(wrist_quat, dtype=np.float64),
        q,
    )
    return FkResult(*out)


def collider_world(skel: HandSkeleton, fk: FkResult, wrist_pos, wrist_quat):
    """Capsule endpoints in world frame, (C,3) and (C,3)."""
    cj = skel.collider_joint
    base_q = np.where(cj[:, None] < 0, wrist_quat[None, :], fk.joint_quat[np.maximum(cj, 0)])
    base_p = np.where(cj[:, None] < 0, np.asarray(wrist_pos)[None, :], fk.joint_pos[np.maximum(cj, 0)])
    R = quat_to_matrix_batch(base_q)
    p0 = base_p + np.einsum("cij,cj->ci", R, skel.collider_p0)
    p1 = base_p + np.einsum("cij,cj->ci", R, skel.collider_p1)
    return p0, p1


def query_points_world(skel: HandSkeleton, fk: FkResult, wrist_pos, wrist_quat) -> np.ndarray:
    """The 23 closest-point query points: 17 joints, 5 tips, palm center."""
    palm = wrist_pos + quat_rotate(wrist_quat, skel.palm_marker)
    return np.concatenate([fk.joint_pos, fk.tip_pos, palm[None, :]], axis=0)


def clamp_to_limits(skel: HandSkeleton, q: np.ndarray) -> np.ndarray:
    return np.clip(q, skel.dof_limits[:, 0], skel.dof_limits[:, 1])


def contact_jacobian(skel: HandSkeleton, fk: FkResult, collider_idx: int, point: np.ndarray) -> np.ndarray:
    """(D,3) jacobian rows: world velocity of `point` per unit DoF rate.

    Only DoFs on the chain from the wrist to the collider's joint
    contribute; palm capsules return all-zero rows (wrist motion is
    handled separately as base velocity).
    """
    rows = np.cross(fk.dof_axis_w, point[None, :] - fk.dof_origin)
    return np.where(skel.dof_ancestor_mask[collider_idx][:, None], rows, 0.0)


@dataclass
class HandState:
    """Pose/velocity snapshot consumed by sensing (the H block source)."""

    wrist_pos: np.ndarray   # (3,)
    wrist_quat: np.ndarray  # (4,)
    wrist_vel: np.ndarray   # (3,)
    wrist_omega: np.ndarray  # (3,) rad/s world
    q: np.ndarray           # (23,)
    qdot: np.ndarray        # (23,)
    qddot: np.ndarray       # (23,)
    joint_pos: np.ndarray   # (22,3) world: 17 joints + 5 tips
    joint_vel: np.ndarray   # (17,3) world linear velocities

    def __post_init__(self):
        assert self.joint_pos.shape == (N_JOINTS + N_TIPS, 3)
        assert self.joint_vel.shape == (N_JOINTS, 3)
        for name, vec, n in (("q", self.q, 23), ("qdot", self.qdot, 23), ("qddot", self.qddot, 23)):
            if vec.shape != (n,):
                raise ValueError(f"{name} must have shape ({n},)")


def _rz(angle: float) -> np.ndarray:
    return quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), angle)


def _ry(angle: float) -> np.ndarray:
    return quat_from_axis_angle(np.array([0.0, 1.0, 0.0]), angle)


def default_skeleton() -> HandSkeleton:
    """Canonical right hand used everywhere unless a JSON override is given."""
    ident = np.array([1.0, 0.0, 0.0, 0.0])
    thumb_rest = quat_mul(_rz(np.deg2rad(-55.0)), _ry(np.deg2rad(25.0)))

    joints = [
        # name, parent, offset, rest quaternion
        ("palm_ring", -1, (0.020, 0.012, 0.0), ident),
        ("palm_pinky", -1, (0.018, 0.026, 0.0), ident),
        ("thumb_cmc", -1, (0.020, -0.018, -0.006), thumb_rest),
        ("thumb_mcp", 2, (0.042, 0.0, 0.0), ident),
        ("thumb_ip", 3, (0.032, 0.0, 0.0), ident),
        ("index_mcp", -1, (0.085, -0.025, 0.0), ident),
        ("index_pip", 5, (0.040, 0.0, 0.0), ident),
        ("index_dip", 6, (0.025, 0.0, 0.0), ident),
        ("middle_mcp", -1, (0.088, -0.008, 0.0), ident),
        ("middle_pip", 8, (0.045, 0.0, 0.0), ident),
        ("middle_dip", 9, (0.028, 0.0, 0.0), ident),
        ("ring_mcp", 0, (0.062, -0.003, 0.0), ident),
        ("ring_pip", 11, (0.040, 0.0, 0.0), ident),
        ("ring_dip", 12, (0.026, 0.0, 0.0), ident),
        ("pinky_mcp", 1, (0.054, 0.0, 0.0), ident),
        ("pinky_pip", 14, (0.032, 0.0, 0.0), ident),
        ("pinky_dip", 15, (0.020, 0.0, 0.0), ident),
    ]

    FLEX = (0.0, 1.6)
    ABD = (-0.35, 0.35)
    CMC = (-0.5, 1.0)
    Y = (0.0, 1.0, 0.0)
    Z = (0.0, 0.0, 1.0)
    XN = (-1.0, 0.0, 0.0)
    dofs = [
        ("palm_ring_flex", 0, XN, FLEX),
        ("palm_pinky_flex", 1, XN, FLEX),
        ("thumb_cmc_abd", 2, Z, CMC),
        ("thumb_cmc_flex", 2, Y, CMC),
        ("thumb_mcp_abd", 3, Z, ABD),
        ("thumb_mcp_flex", 3, Y, FLEX),
        ("thumb_ip_flex", 4, Y, FLEX),
        ("index_mcp_abd", 5, Z, ABD),
        ("index_mcp_flex", 5, Y, FLEX),
        ("index_pip_flex", 6, Y, FLEX),
        ("index_dip_flex", 7, Y, FLEX),
        ("middle_mcp_abd", 8, Z, ABD),
        ("middle_mcp_flex", 8, Y, FLEX),
        ("middle_pip_flex", 9, Y, FLEX),
        ("middle_dip_flex", 10, Y, FLEX),
        ("ring_mcp_abd", 11, Z, ABD),
        ("ring_mcp_flex", 11, Y, FLEX),
        ("ring_pip_flex", 12, Y, FLEX),
        ("ring_dip_flex", 13, Y, FLEX),
        ("pinky_mcp_abd", 14, Z, ABD),
        ("pinky_mcp_flex", 14, Y, FLEX),
        ("pinky_pip_flex", 15, Y, FLEX),
        ("pinky_dip_flex", 16, Y, FLEX),
    ]

    tips = [
        (4, (0.028, 0.0, 0.0)),
        (7, (0.022, 0.0, 0.0)),
        (10, (0.024, 0.0, 0.0)),
        (13, (0.022, 0.0, 0.0)),
        (16, (0.019, 0.0, 0.0)),
    ]

    # finger capsules first (these carry the local voxel sensors), palm last
    colliders = [
        (2, (0.004, 0, 0), (0.038, 0, 0), 0.011),
        (3, (0.004, 0, 0), (0.028, 0, 0), 0.010),
        (4, (0.003, 0, 0), (0.026, 0, 0), 0.009),
        (5, (0.004, 0, 0), (0.036, 0, 0), 0.009),
        (6, (0.003, 0, 0), (0.022, 0, 0), 0.008),
        (7, (0.003, 0, 0), (0.020, 0, 0), 0.0075),
        (8, (0.004, 0, 0), (0.041, 0, 0), 0.009),
        (9, (0.003, 0, 0), (0.025, 0, 0), 0.008),
        (10, (0.003, 0, 0), (0.022, 0, 0), 0.0075),
        (11, (0.004, 0, 0), (0.036, 0, 0), 0.0085),
        (12, (0.003, 0, 0), (0.023, 0, 0), 0.008),
        (13, (0.003, 0, 0), (0.020, 0, 0), 0.007),
        (14, (0.004, 0, 0), (0.028, 0, 0), 0.008),
        (15, (0.003, 0, 0), (0.017, 0, 0), 0.007),
        (16, (0.003, 0, 0), (0.017, 0, 0), 0.0065),
        (-1, (0.018, -0.022, -0.004), (0.078, -0.024, -0.004), 0.012),
        (-1, (0.016, -0.007, -0.004), (0.082, -0.008, -0.004), 0.012),
        (-1, (0.016, 0.008, -0.004), (0.078, 0.009, -0.004), 0.012),
        (-1, (0.015, 0.023, -0.004), (0.068, 0.024, -0.004), 0.012),
    ]

    dof_joint = np.array([d[1] for d in dofs], dtype=np.int32)
    start = np.zeros(N_JOINTS, dtype=np.int32)
    count = np.zeros(N_JOINTS, dtype=np.int32)
    for i, j in enumerate(dof_joint):
        if count[j] == 0:
            start[j] = i
        count[j] += 1

    return HandSkeleton(
        joint_names=[j[0] for j in joints],
        parents=np.array([j[1] for j in joints], dtype=np.int32),
        offsets=np.array([j[2] for j in joints], dtype=np.float64),
        rest_quat=np.array([j[3] for j in joints], dtype=np.float64),
        dof_names=[d[0] for d in dofs],
        dof_joint=dof_joint,
        dof_axis=np.array([d[2] for d in dofs], dtype=np.float64),
        dof_limits=np.array([d[3] for d in dofs], dtype=np.float64),
        joint_dof_start=start,
        joint_dof_count=count,
        tip_parent=np.array([t[0] for t in tips], dtype=np.int32),
        tip_offset=np.array([t[1] for t in tips], dtype=np.float64),
        collider_joint=np.array([c[0] for c in colliders], dtype=np.int32),
        collider_p0=np.array([c[1] for c in colliders], dtype=np.float64),
        collider_p1=np.array([c[2] for c in colliders], dtype=np.float64),
        collider_radius=np.array([c[3] for c in colliders], dtype=np.float64),
        palm_marker=np.array([0.05, 0.0, -0.006]),
    )
