"""Real-time playground session service.

Runs the simulator plus a trained policy at 30 Hz wall-clock over a
WebSocket (length-delimited JSON frames both ways). Each connection gets
an isolated session; input messages set the commanded trigger and an
optional wrist command, which are held (zero-order) between messages.

Input schema (v 1):
    {"v": 1, "trigger": 0.4,
     "wrist": {"mode": "pose", "pose": {"pos": [x,y,z], "quat": [w,x,y,z]}}
          or  {"mode": "velocity", "velocity": {"lin": [x,y,z], "ang": [x,y,z]}}}

Output schema (v 1):
    {"v": 1, "frame": n,
     "hand": {"joints": [[x,y,z] * 22]},
     "object": {"pose": {"pos": [...], "quat": [...]}, "shape": "...", "scale": [...]},
     "forces": {"per_collider": [19 magnitudes kgf], "total_kgf": f, "target_kgf": t},
     "reward": {"rf": ..., "rp": ...},
     "demo": {"scene": "...", "level": n}}

Malformed input produces {"v":1,"error":...} and the session keeps its
last good command. Simulation divergence produces a reset notice frame
and a fresh world on the next tick.
"""
from __future__ import annotations

import asyncio
import json
import logging
import os
import time
from dataclasses import dataclass, replace

import numpy as np

from .hand import default_skeleton
from .physics import (
    ObjectState,
    PHYSICS_DT,
    SHAPE_NAMES,
    SimulationDiverged,
    WorldState,
    step_physics,
)
from .reward import force_reward, proximity_reward, target_force, total_force_kgf
from .scenario import (
    FactorSwitches,
    SUBSTEPS,
    STABILIZATION_FRAMES,
    action_to_targets,
    build_world,
    generate_scenario,
    hand_state_of,
)
from .sensing import assemble_observation, closest_features, collider_forces_kgf, KGF

log = logging.getLogger("griplab.service")

TICK_HZ = 30.0
SCENES = ("free-grip", "can-squeeze")
RATCHET_RELEASE = 0.05
MAX_LEVEL = 10

CAN_HALF_EXT = np.array([0.025, 0.025, 0.04])


def update_level(level: int, total_kgf: float, trigger: float) -> int:
    """Can-squeeze deformation ratchet.

    Level only rises while squeezing (1 level per integer kgf, capped at
    10) and holds its maximum until the trigger drops below the release
    threshold, which resets the attempt.
    """
    if trigger < RATCHET_RELEASE:
        return 0
    measured = int(np.clip(np.floor(total_kgf), 0, MAX_LEVEL))
    return max(level, measured)


@dataclass
class SessionConfig:
    scene: str = "free-grip"
    seed: int = 0
    checkpoint: str = ""

    def __post_init__(self):
        if self.scene not in SCENES:
            raise ValueError(f"scene must be one of {SCENES}")


class PlaygroundSession:
    """One live world + policy; tick() advances a single control frame."""

    def __init__(self, policy, config: SessionConfig = None, skeleton=None):
        self.policy = policy
        self.config = config or SessionConfig()
        self.skeleton = skeleton or default_skeleton()
        self.frame = 0
        self.trigger = 0.0
        self.level = 0
        self.wrist_cmd = None
        self._notice = ""
        self._reset_world()

    def _reset_world(self):
        seed = self.config.seed + self.frame  # new spawn each reset
        if self.config.scene == "can-squeeze":
            script = generate_scenario(seed, FactorSwitches(False, False, False))
            world = build_world(script, self.skeleton)
            # an upright can held in place: the demo is about force control
            world = replace(
                world,
                obj=replace(
                    world.obj,
                    shape=2,
                    half_ext=CAN_HALF_EXT.copy(),
                    quat=np.array([1.0, 0.0, 0.0, 0.0]),
                    kinematic=True,
                ),
            )
        else:
            script = generate_scenario(seed, FactorSwitches(True, False, False))
            world = build_world(script, self.skeleton)
        self.world = world
        self.script = script
        self.history = np.zeros(6)
        self.prev_action = np.zeros(23)
        self._prev_qdot = world.qdot.copy()
        self._frames_since_reset = 0
        self.level = 0

    def handle_input(self, text: str):
        """Validate one client message; returns an error frame dict or None."""
        try:
            msg = json.loads(text)
        except json.JSONDecodeError as err:
            return {"v": 1, "error": f"invalid json: {err.msg}"}
        if not isinstance(msg, dict) or msg.get("v") != 1:
            return {"v": 1, "error": "missing or unsupported schema version"}
        if "trigger" in msg:
            t = msg["trigger"]
            if not isinstance(t, (int, float)) or isinstance(t, bool) or not 0.0 <= t <= 1.0:
                return {"v": 1, "error": "trigger must be a number in [0,1]"}
            self.trigger = float(t)
        wrist = msg.get("wrist")
        if wrist is not None:
            err = self._parse_wrist(wrist)
            if err:
                return {"v": 1, "error": err}
        return None

    def _parse_wrist(self, wrist):
        if not isinstance(wrist, dict):
            return "wrist must be an object"
        mode = wrist.get("mode")
        if mode == "pose":
            pose = wrist.get("pose", {})
            try:
                pos = np.asarray(pose["pos"], dtype=np.float64).reshape(3)
                quat = np.asarray(pose["quat"], dtype=np.float64).reshape(4)
            except (KeyError, TypeError, ValueError):
                return "pose mode requires pos[3] and quat[4]"
            n = np.linalg.norm(quat)
            if not np.isfinite(pos).all() or n < 1e-6:
                return "pose values must be finite with a nonzero quaternion"
            self.wrist_cmd = ("pose", pos, quat / n)
        elif mode == "velocity":
            vel = wrist.get("velocity", {})
            try:
                lin = np.asarray(vel["lin"], dtype=np.float64).reshape(3)
                ang = np.asarray(vel["ang"], dtype=np.float64).reshape(3)
            except (KeyError, TypeError, ValueError):
                return "velocity mode requires lin[3] and ang[3]"
            if not (np.isfinite(lin).all() and np.isfinite(ang).all()):
                return "velocity values must be finite"
            self.wrist_cmd = ("velocity", lin, ang)
        else:
            return "wrist.mode must be 'pose' or 'velocity'"
        return None

    def _apply_wrist(self):
        if self.wrist_cmd is None:
            return
        kind, a, b = self.wrist_cmd
        if kind == "pose":
            self.world = replace(
                self.world,
                wrist_pos=a.copy(),
                wrist_quat=b.copy(),
                wrist_vel=np.zeros(3),
                wrist_omega=np.zeros(3),
            )
        else:
            self.world = replace(self.world, wrist_vel=a.copy(), wrist_omega=b.copy())

    def tick(self) -> dict:
        """Advance one 1/30 s control frame and emit the output message."""
        self.history = np.roll(self.history, -1)
        self.history[-1] = self.trigger
        self._apply_wrist()

        qddot = (self.world.qdot - self._prev_qdot) * TICK_HZ
        self._prev_qdot = self.world.qdot.copy()
        hand = hand_state_of(self.world, qddot)
        obs = assemble_observation(
            self.skeleton, hand, self.world.obj, self.world.contacts,
            self.history, self.prev_action, fk=self.world.fk,
        )
        squashed = np.asarray(self.policy(obs), dtype=np.float64)
        self.world = replace(self.world, q_target=action_to_targets(self.skeleton, squashed))
        self.prev_action = squashed

        if self.config.scene == "free-grip" and self._frames_since_reset == STABILIZATION_FRAMES:
            self.world = replace(self.world, obj=replace(self.world.obj, kinematic=False))

        notice = self._notice
        self._notice = ""
        try:
            for _ in range(SUBSTEPS):
                self.world = step_physics(self.world, PHYSICS_DT)
        except SimulationDiverged as err:
            self._notice = ""
            self._reset_world()
            out = self._message()
            out["notice"] = f"session-reset: {err}"
            self.frame += 1
            self._frames_since_reset += 1
            return out

        self._frames_since_reset += 1
        out = self._message()
        if notice:
            out["notice"] = notice
        self.frame += 1
        return out

    def _message(self) -> dict:
        w = self.world
        forces = collider_forces_kgf(w.contacts, w.wrist_quat)
        total = total_force_kgf(forces)
        target = target_force(self.history)
        hand = hand_state_of(w, np.zeros(23))
        c, _ = closest_features(self.skeleton, hand, w.obj, fk=w.fk)
        if self.config.scene == "can-squeeze":
            self.level = update_level(self.level, total, self.trigger)
        joints = np.concatenate([w.fk.joint_pos, w.fk.tip_pos], axis=0)
        return {
            "v": 1,
            "frame": self.frame,
            "hand": {"joints": [[round(v, 6) for v in row] for row in joints.tolist()]},
            "object": {
                "pose": {
                    "pos": [round(v, 6) for v in w.obj.pos.tolist()],
                    "quat": [round(v, 8) for v in w.obj.quat.tolist()],
                },
                "shape": SHAPE_NAMES[w.obj.shape],
                "scale": [round(v, 6) for v in (w.obj.half_ext * 2.0).tolist()],
            },
            "forces": {
                "per_collider": [round(float(np.linalg.norm(f)), 6) for f in forces],
                "total_kgf": round(total, 6),
                "target_kgf": round(target, 6),
            },
            "reward": {
                "rf": round(force_reward(forces, target), 6),
                "rp": round(proximity_reward(c), 6),
            },
            "demo": {"scene": self.config.scene, "level": self.level},
        }


# -------------------------------------------------------------- asyncio glue


async def session_loop(websocket, policy, config: SessionConfig):
    """Fixed 30 Hz ticker plus a concurrent input reader, per connection."""
    from websockets.exceptions import ConnectionClosed

    session = PlaygroundSession(policy, config)

    async def reader():
        async for text in websocket:
            err = session.handle_input(text)
            if err is not None:
                await websocket.send(json.dumps(err))

    reader_task = asyncio.create_task(reader())
    dt = 1.0 / TICK_HZ
    next_t = time.monotonic() + dt
    try:
        while True:
            out = session.tick()
            await websocket.send(json.dumps(out))
            delay = next_t - time.monotonic()
            next_t += dt
            if delay > 0:
                await asyncio.sleep(delay)
            else:
                # fell behind; re-anchor instead of bursting
                next_t = time.monotonic() + dt
    except ConnectionClosed:
        pass
    finally:
        reader_task.cancel()


def load_service_config(path: str = None) -> dict:
    """Config file with env-var overrides (GRIPLAB_HOST/PORT/CHECKPOINT/SCENE)."""
    cfg = {"host": "127.0.0.1", "port": 8765, "checkpoint": "", "scene": "free-grip", "seed": 0}
    if path:
        with open(path) as fh:
            cfg.update(json.load(fh))
    for key, env in (
        ("host", "GRIPLAB_HOST"),
        ("port", "GRIPLAB_PORT"),
        ("checkpoint", "GRIPLAB_CHECKPOINT"),
        ("scene", "GRIPLAB_SCENE"),
        ("seed", "GRIPLAB_SEED"),
    ):
        if env in os.environ:
            cfg[key] = os.environ[env]
    cfg["port"] = int(cfg["port"])
    cfg["seed"] = int(cfg["seed"])
    return cfg


async def serve_async(policy, host: str, port: int, config: SessionConfig, ready=None):
    import websockets

    async def handler(websocket):
        log.info("session open: %s", websocket.remote_address)
        await session_loop(websocket, policy, config)
        log.info("session closed")

    async with websockets.serve(handler, host, port) as server:
        if ready is not None:
            ready.set_result(server.sockets[0].getsockname()[1])
        await asyncio.Future()


def serve(checkpoint: str, host="127.0.0.1", port=8765, scene="free-grip", seed=0):
    """Blocking entry point used by the CLI."""
    from .agent import load_checkpoint

    agent, _ = load_checkpoint(checkpoint)
    config = SessionConfig(scene=scene, seed=seed, checkpoint=checkpoint)
    log.info("serving on ws://%s:%d scene=%s", host, port, scene)
    asyncio.run(serve_async(agent.act_deterministic, host, port, config))
