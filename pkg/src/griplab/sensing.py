"""Observation assembly: the 3023-dim state vector.

Layout (offsets in OBS_LAYOUT, emitted as a manifest by the CLI):

  H block, 186: joint/tip positions (22x3), DoF angles (23), joint linear
    velocities (17x3), DoF velocities (23), DoF accelerations (23).
  O block, 2751: gravity direction in wrist frame (3), global voxel
    occupancy (450), local voxel occupancy (2160), closest-point vectors
    (23x3, cm), surface normals (23x3).
  T block, 86: per-collider contact force vectors in kgf (19x3), trigger
    history (6, most recent last), previous squashed action (23).

All spatial features are expressed in the wrist frame so the policy is
invariant to absolute pose; world motion remains visible through the
rotated velocity features and the gravity direction.

The global sensor is a 10x9x5 grid of 2 cm cells fixed to the wrist and
covering the grasp pocket in front of the palm; each of the 15 finger
capsules carries a 6x6x4 grid of 0.5 cm cells centered on its segment
(15 * 144 = 2160). A cell reads 1 iff its center lies inside or on the
object surface.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import quat_rotate_inv, quat_to_matrix
from .hand import (
    HandSkeleton,
    HandState,
    N_COLLIDERS,
    N_LVS_COLLIDERS,
    forward_kinematics,
    query_points_world,
)
from .physics import ObjectState

KGF = 9.80665

OBS_LAYOUT = (
    ("h_positions", 66),
    ("h_angles", 23),
    ("h_lin_vel", 51),
    ("h_dof_vel", 23),
    ("h_dof_acc", 23),
    ("o_gravity", 3),
    ("o_gvs", 450),
    ("o_lvs", 2160),
    ("o_closest", 69),
    ("o_normals", 69),
    ("t_forces", 57),
    ("t_trigger", 6),
    ("t_prev_action", 23),
)
OBS_DIM = sum(n for _, n in OBS_LAYOUT)
N_QUERIES = 23


def layout_manifest() -> list:
    """[(block, offset, length)] rows; total must be 3023."""
    rows = []
    off = 0
    for name, n in OBS_LAYOUT:
        rows.append((name, off, n))
        off += n
    return rows


def block_slice(name: str) -> slice:
    off = 0
    for n, length in OBS_LAYOUT:
        if n == name:
            return slice(off, off + length)
        off += length
    raise KeyError(name)


@dataclass
class VoxelSensorSpec:
    frame: int          # -1 = wrist, else collider index
    dims: tuple         # (nx, ny, nz)
    cell: float         # m
    origin: np.ndarray  # local min corner

    def __post_init__(self):
        if self.cell <= 0:
            raise ValueError("cell size must be positive")

    @property
    def n_cells(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    def centers_local(self) -> np.ndarray:
        """(n,3) cell centers, flattened C-order over (ix, iy, iz)."""
        cached = getattr(self, "_centers", None)
        if cached is not None:
            return cached
        nx, ny, nz = self.dims
        ix, iy, iz = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
        idx = np.stack([ix, iy, iz], axis=-1).reshape(-1, 3)
        centers = self.origin[None, :] + (idx + 0.5) * self.cell
        object.__setattr__(self, "_centers", centers)
        return centers


GVS_SPEC = VoxelSensorSpec(
    frame=-1, dims=(10, 9, 5), cell=0.02, origin=np.array([-0.05, -0.09, -0.11])
)


def lvs_specs(skel: HandSkeleton) -> list:
    """One 6x6x4 half-centimeter grid per finger capsule, capsule-centered."""
    cached = getattr(skel, "_lvs_specs", None)
    if cached is not None:
        return cached
    specs = []
    for c in range(N_LVS_COLLIDERS):
        mid = 0.5 * (skel.collider_p0[c] + skel.collider_p1[c])
        specs.append(
            VoxelSensorSpec(
                frame=c,
                dims=(6, 6, 4),
                cell=0.005,
                origin=mid - np.array([0.015, 0.015, 0.010]),
            )
        )
    object.__setattr__(skel, "_lvs_specs", specs)
    return specs


def sample_voxels(spec: VoxelSensorSpec, frame_pos, frame_quat, obj: ObjectState) -> np.ndarray:
    """Occupancy vector for one sensor; zeros when there is no object."""
    if obj is None:
        return np.zeros(spec.n_cells, dtype=np.uint8)
    local = spec.centers_local()
    world = np.asarray(frame_pos)[None, :] + local @ quat_to_matrix(np.asarray(frame_quat)).T
    return kernels.occupancy(obj.shape, obj.half_ext, obj.pos, obj.quat, world)


def closest_features(skel: HandSkeleton, hand: HandState, obj: ObjectState, fk=None):
    """(c, n): 23 surface offset vectors (wrist frame, cm) and unit normals.

    c_j = surface point minus query point. With no object both are zero.
    """
    if fk is None:
        fk = forward_kinematics(skel, hand.wrist_pos, hand.wrist_quat, hand.q)
    queries = query_points_world(skel, fk, hand.wrist_pos, hand.wrist_quat)
    if obj is None:
        return np.zeros((N_QUERIES, 3)), np.zeros((N_QUERIES, 3))
    pts, nrm, _ = kernels.closest_points(obj.shape, obj.half_ext, obj.pos, obj.quat, queries)
    c = quat_rotate_inv(hand.wrist_quat, pts - queries) * 100.0
    n = quat_rotate_inv(hand.wrist_quat, nrm)
    return c, n


def collider_forces_kgf(contacts, wrist_quat) -> np.ndarray:
    """(19,3) per-collider contact force sums, wrist frame, kgf."""
    f = np.zeros((N_COLLIDERS, 3))
    for cp in contacts:
        if cp.collider >= 0:
            f[cp.collider] += cp.force
    return quat_rotate_inv(wrist_quat, f / KGF)


def assemble_observation(
    skel: HandSkeleton,
    hand: HandState,
    obj: ObjectState,
    contacts,
    trigger_history: np.ndarray,
    prev_action: np.ndarray,
    gravity=np.array([0.0, 0.0, -9.81]),
    fk=None,
) -> np.ndarray:
    trigger_history = np.asarray(trigger_history, dtype=np.float64)
    prev_action = np.asarray(prev_action, dtype=np.float64)
    if trigger_history.shape != (6,):
        raise ValueError("t_trigger block requires 6 values")
    if prev_action.shape != (23,):
        raise ValueError("t_prev_action block requires 23 values")

    wq = hand.wrist_quat
    rel_pos = quat_rotate_inv(wq, hand.joint_pos - hand.wrist_pos[None, :])
    rel_vel = quat_rotate_inv(wq, hand.joint_vel)
    o_g = quat_rotate_inv(wq, np.asarray(gravity, dtype=np.float64))

    gvs = sample_voxels(GVS_SPEC, hand.wrist_pos, wq, obj).astype(np.float64)

    if fk is None:
        fk = forward_kinematics(skel, hand.wrist_pos, wq, hand.q)
    lvs_parts = []
    for spec in lvs_specs(skel):
        j = skel.collider_joint[spec.frame]
        if j < 0:
            fp, fq = hand.wrist_pos, wq
        else:
            fp, fq = fk.joint_pos[j], fk.joint_quat[j]
        lvs_parts.append(sample_voxels(spec, fp, fq, obj))
    lvs = np.concatenate(lvs_parts).astype(np.float64)

    c, n = closest_features(skel, hand, obj, fk=fk)
    forces = collider_forces_kgf(contacts, wq)

    parts = {
        "h_positions": rel_pos.ravel(),
        "h_angles": hand.q,
        "h_lin_vel": rel_vel.ravel(),
        "h_dof_vel": hand.qdot,
        "h_dof_acc": hand.qddot,
        "o_gravity": o_g,
        "o_gvs": gvs,
        "o_lvs": lvs,
        "o_closest": c.ravel(),
        "o_normals": n.ravel(),
        "t_forces": forces.ravel(),
        "t_trigger": trigger_history,
        "t_prev_action": prev_action,
    }
    out = np.empty(OBS_DIM)
    off = 0
    for name, length in OBS_LAYOUT:
        block = np.asarray(parts[name], dtype=np.float64).ravel()
        if block.shape[0] != length:
            raise ValueError(f"block {name}: expected length {length}, got {block.shape[0]}")
        out[off : off + length] = block
        off += length
    return out
