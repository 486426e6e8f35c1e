"""Procedural 3-second training episodes.

Each episode runs 90 control frames at 30 Hz with 4 physics substeps per
frame. The object spawns inside a 10 cm cube centered 8 cm in front of
the palm, held kinematic for the first 15 frames (0.5 s) so the fingers
can form a grip, then released. When wrist movement is enabled the floor
disappears at release and the wrist follows a per-substep acceleration
schedule (resampled every physics step, velocity-damped 0.98/step, caps
2 m/s^2 and 360 deg/s^2).

The trigger signal is a clamped noisy sinusoid; with trigger variation
disabled it collapses to a constant random value per episode.

Every random quantity is derived from the script seed through tagged
child streams, so a stored script replays bit-identically.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .geometry import quat_from_axis_angle, quat_mul, quat_normalize, quat_rotate
from .hand import HandState, default_skeleton
from .physics import (
    ObjectState,
    PHYSICS_DT,
    SHAPE_IDS,
    SHAPE_NAMES,
    SimulationDiverged,
    WorldState,
    step_physics,
)
from .reward import force_reward, proximity_reward, should_terminate, target_force, total_force_kgf, total_reward
from .sensing import assemble_observation, closest_features, collider_forces_kgf

N_FRAMES = 90
STABILIZATION_FRAMES = 15
SUBSTEPS = 4
CONTROL_DT = 1.0 / 30.0
N_SUBSTEPS_TOTAL = N_FRAMES * SUBSTEPS

SCALE_RANGE = (0.5, 1.5)
BASE_HALF_EXT = {
    kernels.SPHERE: np.array([0.03, 0.03, 0.03]),
    kernels.CUBE: np.array([0.025, 0.025, 0.025]),
    kernels.CYLINDER: np.array([0.025, 0.025, 0.04]),
}
SPAWN_CENTER = np.array([0.05, 0.0, -0.086])  # wrist frame: 8 cm off the palm face (palm normal -z)
SPAWN_HALF = 0.05
FLOOR_OFFSET = -0.115  # desk plane relative to wrist height at spawn
PALM_CLEAR_Z = -0.018  # palm capsule underside minus margin; spawns stay below
LIN_ACC_CAP = 2.0
ANG_ACC_CAP = 2.0 * np.pi  # 360 deg/s^2
WRIST_DAMPING = 0.98

_STREAM_OBJECT, _STREAM_TRIGGER, _STREAM_WRIST = 0, 1, 2


@dataclass
class FactorSwitches:
    object_randomization: bool = True
    trigger_variation: bool = False
    wrist_movement: bool = False

    def as_dict(self):
        return {
            "object_randomization": self.object_randomization,
            "trigger_variation": self.trigger_variation,
            "wrist_movement": self.wrist_movement,
        }


@dataclass
class TriggerParams:
    frequency: float
    amplitude: float
    offset: float
    phase: float
    noise_sigma: float
    noise: np.ndarray  # (90,) per-frame draws, zeros when sigma == 0


@dataclass
class ScenarioScript:
    seed: int
    switches: FactorSwitches
    shape: int
    scale: np.ndarray        # (3,) per-axis factors
    spawn_pos: np.ndarray    # (3,) wrist frame
    spawn_quat: np.ndarray   # (4,)
    trigger: TriggerParams
    wrist_init_pos: np.ndarray
    wrist_init_yaw: float
    wrist_lin_acc: np.ndarray  # (360,3) per physics substep
    wrist_ang_acc: np.ndarray  # (360,3)

    def half_ext(self) -> np.ndarray:
        return BASE_HALF_EXT[self.shape] * self.scale


def _uniform_quat(rng) -> np.ndarray:
    q = rng.standard_normal(4)
    q = quat_normalize(q)
    return q if q[0] >= 0 else -q


_AXIS_UP_QUAT = {
    0: quat_from_axis_angle(np.array([0.0, 1.0, 0.0]), -np.pi / 2.0),
    1: quat_from_axis_angle(np.array([1.0, 0.0, 0.0]), np.pi / 2.0),
    2: np.array([1.0, 0.0, 0.0, 0.0]),
}
_FLIP_QUAT = quat_from_axis_angle(np.array([1.0, 0.0, 0.0]), np.pi)
MAX_SPAWN_TILT = 0.05


def _resting_quat(rng, shape: int, half_ext: np.ndarray) -> np.ndarray:
    """Random statically stable desk pose for the given shape.

    Uniform SO(3) orientations balance a shape on a support point that is
    generally not under its center of mass; left unactuated it rolls off
    the desk like an egg, truncating the episode before the hand can act.
    Real placement only reaches the stable manifold: ellipsoids lie on
    their shortest axis, cubes on a face, cylinders upright or on their
    side. Yaw stays free and a small tilt keeps poses off-axis.
    """
    if shape == kernels.CUBE:
        axis = int(rng.integers(3))
        flip = int(rng.integers(2))
    elif shape == kernels.SPHERE:
        axis = int(np.argmin(half_ext))
        flip = 0
    else:
        if rng.integers(2):
            axis = 2  # upright on a cap
        else:
            axis = int(np.argmin(half_ext[:2]))  # on its side, minor axis down
        flip = 0
    q = _AXIS_UP_QUAT[axis]
    if flip:
        q = quat_mul(_FLIP_QUAT, q)
    yaw = quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), rng.uniform(0.0, 2.0 * np.pi))
    tilt_dir = rng.uniform(0.0, 2.0 * np.pi)
    tilt = quat_from_axis_angle(
        np.array([np.cos(tilt_dir), np.sin(tilt_dir), 0.0]), rng.uniform(0.0, MAX_SPAWN_TILT)
    )
    q = quat_normalize(quat_mul(tilt, quat_mul(yaw, q)))
    return q if q[0] >= 0 else -q


def vertical_support(shape: int, half_ext: np.ndarray, quat: np.ndarray) -> float:
    """Half-height of the oriented shape along world z (support function)."""
    from .geometry import quat_to_matrix

    d = quat_to_matrix(quat)[2, :]  # world z expressed in the local frame
    a, b, c = half_ext
    if shape == kernels.SPHERE:
        return float(np.sqrt((a * d[0]) ** 2 + (b * d[1]) ** 2 + (c * d[2]) ** 2))
    if shape == kernels.CUBE:
        return float(a * abs(d[0]) + b * abs(d[1]) + c * abs(d[2]))
    return float(np.hypot(a * d[0], b * d[1]) + c * abs(d[2]))


def generate_scenario(
    seed: int,
    switches: FactorSwitches,
    shapes=None,
    fixed_trigger: float = None,
) -> ScenarioScript:
    """Deterministic function of (seed, switches, optional overrides).

    `shapes` restricts the sampled shape set (training configs use it for
    sphere-only smoke runs); `fixed_trigger` pins the trigger waveform to
    a constant regardless of the trigger_variation switch.
    """
    obj_rng = np.random.default_rng(np.random.SeedSequence([seed, _STREAM_OBJECT]))
    trig_rng = np.random.default_rng(np.random.SeedSequence([seed, _STREAM_TRIGGER]))
    wrist_rng = np.random.default_rng(np.random.SeedSequence([seed, _STREAM_WRIST]))

    if switches.object_randomization:
        pool = list(shapes) if shapes else [kernels.SPHERE, kernels.CUBE, kernels.CYLINDER]
        shape = int(pool[obj_rng.integers(len(pool))])
        scale = obj_rng.uniform(*SCALE_RANGE, size=3)
        spawn = SPAWN_CENTER + obj_rng.uniform(-SPAWN_HALF, SPAWN_HALF, size=3)
        quat = _resting_quat(obj_rng, shape, BASE_HALF_EXT[shape] * scale)
    else:
        shape = kernels.SPHERE
        scale = np.ones(3)
        spawn = SPAWN_CENTER.copy()
        quat = np.array([1.0, 0.0, 0.0, 0.0])
    # the object must start clear of both the desk and the palm capsules or
    # the release frame begins in deep penetration and fires it out of the
    # hand. Orientations too tall for the desk-to-palm gap (upright long
    # cylinders, heavily tilted cubes) are resampled toward flatter poses.
    he = BASE_HALF_EXT[shape] * scale
    s_z = vertical_support(shape, he, quat)
    for _ in range(64):
        if FLOOR_OFFSET + s_z + 0.002 <= PALM_CLEAR_Z - s_z:
            break
        quat = _resting_quat(obj_rng, shape, he)
        s_z = vertical_support(shape, he, quat)
    # rest the object on the desk at its sampled orientation. A spawn higher
    # in the palm gap free-falls at the kinematic handoff, and the landing
    # kick on an off-axis pose can roll it out of reach before any finger
    # comes near.
    spawn[2] = FLOOR_OFFSET + s_z + 0.001

    if fixed_trigger is not None:
        trig = TriggerParams(0.0, 0.0, float(fixed_trigger), 0.0, 0.0, np.zeros(N_FRAMES))
    elif switches.trigger_variation:
        sigma = 0.05
        trig = TriggerParams(
            frequency=float(trig_rng.uniform(0.1, 1.5)),
            amplitude=float(trig_rng.uniform(0.0, 0.5)),
            offset=float(trig_rng.uniform(0.0, 1.0)),
            phase=float(trig_rng.uniform(0.0, 2.0 * np.pi)),
            noise_sigma=sigma,
            noise=trig_rng.normal(0.0, sigma, size=N_FRAMES),
        )
    else:
        trig = TriggerParams(0.0, 0.0, float(trig_rng.uniform(0.0, 1.0)), 0.0, 0.0, np.zeros(N_FRAMES))

    wrist_pos = wrist_rng.uniform(-0.01, 0.01, size=3)
    wrist_yaw = float(wrist_rng.uniform(0.0, 2.0 * np.pi))
    lin = np.zeros((N_SUBSTEPS_TOTAL, 3))
    ang = np.zeros((N_SUBSTEPS_TOTAL, 3))
    if switches.wrist_movement:
        # schedule starts once the object is released
        start = STABILIZATION_FRAMES * SUBSTEPS
        n = N_SUBSTEPS_TOTAL - start
        for arr, cap in ((lin, LIN_ACC_CAP), (ang, ANG_ACC_CAP)):
            dirs = wrist_rng.standard_normal((n, 3))
            dirs /= np.maximum(np.linalg.norm(dirs, axis=1, keepdims=True), 1e-12)
            mags = wrist_rng.uniform(0.0, cap, size=n)
            arr[start:] = dirs * mags[:, None]

    return ScenarioScript(
        seed=int(seed),
        switches=replace(switches),
        shape=shape,
        scale=np.asarray(scale, dtype=np.float64),
        spawn_pos=np.asarray(spawn, dtype=np.float64),
        spawn_quat=quat,
        trigger=trig,
        wrist_init_pos=wrist_pos,
        wrist_init_yaw=wrist_yaw,
        wrist_lin_acc=lin,
        wrist_ang_acc=ang,
    )


def trigger_value(script: ScenarioScript, t: float) -> float:
    """Commanded trigger in [0,1] at time t seconds (frame-quantized noise)."""
    p = script.trigger
    frame = min(max(int(round(t * 30.0)), 0), N_FRAMES - 1)
    raw = p.offset + p.amplitude * np.sin(2.0 * np.pi * p.frequency * t + p.phase) + p.noise[frame]
    return float(np.clip(raw, 0.0, 1.0))


@dataclass
class FrameRecord:
    frame: int
    trigger: float
    target_kgf: float
    total_force_kgf: float
    r_f: float
    r_p: float
    r: float


@dataclass
class EpisodeResult:
    frames_completed: int
    early_terminated: bool
    records: list
    diagnostic: str = ""

    def __post_init__(self):
        if (self.frames_completed == N_FRAMES) == self.early_terminated:
            raise ValueError("early_terminated must mean frames_completed < 90")

    @property
    def mean_rp(self) -> float:
        return float(np.mean([r.r_p for r in self.records])) if self.records else 0.0

    @property
    def mean_rf(self) -> float:
        return float(np.mean([r.r_f for r in self.records])) if self.records else 0.0

    def trigger_force_pairs(self):
        return [(r.trigger, r.total_force_kgf) for r in self.records]


def build_world(script: ScenarioScript, skeleton=None) -> WorldState:
    skeleton = skeleton or default_skeleton()
    yaw_quat = quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), script.wrist_init_yaw)
    obj = ObjectState(
        shape=script.shape,
        half_ext=script.half_ext(),
        pos=script.wrist_init_pos + quat_rotate(yaw_quat, script.spawn_pos),
        quat=quat_mul(yaw_quat, script.spawn_quat),
        vel=np.zeros(3),
        omega=np.zeros(3),
        kinematic=True,
    )
    return WorldState(
        skeleton=skeleton,
        wrist_pos=script.wrist_init_pos.copy(),
        wrist_quat=yaw_quat,
        obj=obj,
        floor_z=float(script.wrist_init_pos[2] + FLOOR_OFFSET),
    )


def action_to_targets(skeleton, squashed: np.ndarray) -> np.ndarray:
    """Map a [-1,1]^23 action onto the joint limit ranges."""
    lo = skeleton.dof_limits[:, 0]
    hi = skeleton.dof_limits[:, 1]
    return lo + 0.5 * (np.asarray(squashed) + 1.0) * (hi - lo)


def hand_state_of(world: WorldState, qddot_control: np.ndarray) -> HandState:
    return HandState(
        wrist_pos=world.wrist_pos,
        wrist_quat=world.wrist_quat,
        wrist_vel=world.wrist_vel,
        wrist_omega=world.wrist_omega,
        q=world.q,
        qdot=world.qdot,
        qddot=qddot_control,
        joint_pos=np.concatenate([world.fk.joint_pos, world.fk.tip_pos], axis=0),
        joint_vel=world.joint_vel,
    )


def run_episode(
    script: ScenarioScript,
    policy,
    skeleton=None,
    strict_termination: bool = False,
    observer=None,
) -> EpisodeResult:
    """Drive one scripted episode.

    `policy` maps an observation vector to a squashed action in [-1,1]^23.
    `observer`, when given, is called as observer(frame, obs, world) after
    the observation is built (the trainer hooks rollouts through this).
    """
    skeleton = skeleton or default_skeleton()
    world = build_world(script, skeleton)
    history = np.zeros(6)
    prev_action = np.zeros(23)
    prev_qdot = world.qdot.copy()
    records = []

    for frame in range(N_FRAMES):
        u = trigger_value(script, frame * CONTROL_DT)
        history = np.roll(history, -1)
        history[-1] = u

        qddot_control = (world.qdot - prev_qdot) / CONTROL_DT
        prev_qdot = world.qdot.copy()
        hand = hand_state_of(world, qddot_control)
        obs = assemble_observation(
            skeleton, hand, world.obj, world.contacts, history, prev_action, fk=world.fk
        )
        if observer is not None:
            observer(frame, obs, world)

        squashed = np.asarray(policy(obs), dtype=np.float64)
        world = replace(world, q_target=action_to_targets(skeleton, squashed))
        prev_action = squashed

        if frame == STABILIZATION_FRAMES:
            world = replace(world, obj=replace(world.obj, kinematic=False))
            if script.switches.wrist_movement:
                world = replace(world, floor_z=None, wrist_damping=WRIST_DAMPING)

        try:
            for s in range(SUBSTEPS):
                idx = frame * SUBSTEPS + s
                world = replace(
                    world,
                    wrist_lin_acc=script.wrist_lin_acc[idx],
                    wrist_ang_acc=script.wrist_ang_acc[idx],
                )
                world = step_physics(world, PHYSICS_DT)
        except SimulationDiverged as err:
            return EpisodeResult(frame, True, records, diagnostic=str(err))

        target = target_force(history)
        forces = collider_forces_kgf(world.contacts, world.wrist_quat)
        c, _ = closest_features(skeleton, hand_state_of(world, qddot_control), world.obj, fk=world.fk)
        r_f = force_reward(forces, target)
        r_p = proximity_reward(c)
        records.append(
            FrameRecord(
                frame=frame,
                trigger=u,
                target_kgf=target,
                total_force_kgf=total_force_kgf(forces),
                r_f=r_f,
                r_p=r_p,
                r=total_reward(r_f, r_p),
            )
        )

        palm = world.wrist_pos + quat_rotate(world.wrist_quat, skeleton.palm_marker)
        if (
            frame + 1 < N_FRAMES
            and frame >= STABILIZATION_FRAMES
            and should_terminate(
                world.obj.pos, palm, world.obj.largest_extent(), strict=strict_termination
            )
        ):
            return EpisodeResult(frame + 1, True, records)

    return EpisodeResult(N_FRAMES, False, records)


def script_to_json(script: ScenarioScript) -> str:
    return json.dumps(
        {
            "version": 1,
            "seed": script.seed,
            "switches": script.switches.as_dict(),
            "shape": SHAPE_NAMES[script.shape],
            "scale": script.scale.tolist(),
            "spawn_pos": script.spawn_pos.tolist(),
            "spawn_quat": script.spawn_quat.tolist(),
            "trigger": {
                "frequency": script.trigger.frequency,
                "amplitude": script.trigger.amplitude,
                "offset": script.trigger.offset,
                "phase": script.trigger.phase,
                "noise_sigma": script.trigger.noise_sigma,
                "noise": script.trigger.noise.tolist(),
            },
            "wrist_init_pos": script.wrist_init_pos.tolist(),
            "wrist_init_yaw": script.wrist_init_yaw,
            "wrist_lin_acc": script.wrist_lin_acc.tolist(),
            "wrist_ang_acc": script.wrist_ang_acc.tolist(),
        }
    )


def script_from_json(text: str) -> ScenarioScript:
    doc = json.loads(text)
    if doc.get("version") != 1:
        raise ValueError(f"unsupported scenario version {doc.get('version')!r}")
    t = doc["trigger"]
    return ScenarioScript(
        seed=doc["seed"],
        switches=FactorSwitches(**doc["switches"]),
        shape=SHAPE_IDS[doc["shape"]],
        scale=np.array(doc["scale"]),
        spawn_pos=np.array(doc["spawn_pos"]),
        spawn_quat=np.array(doc["spawn_quat"]),
        trigger=TriggerParams(
            frequency=t["frequency"],
            amplitude=t["amplitude"],
            offset=t["offset"],
            phase=t["phase"],
            noise_sigma=t["noise_sigma"],
            noise=np.array(t["noise"]),
        ),
        wrist_init_pos=np.array(doc["wrist_init_pos"]),
        wrist_init_yaw=doc["wrist_init_yaw"],
        wrist_lin_acc=np.array(doc["wrist_lin_acc"]),
        wrist_ang_acc=np.array(doc["wrist_ang_acc"]),
    )
