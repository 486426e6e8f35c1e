"""Curriculum PPO training loop.

One epoch = one scripted episode in each of n_envs sequential
environments (the batch is 16 x up-to-90 control frames), followed by
one PPO round over the collected transitions. Scenario seeds derive from
(run seed, epoch, env index) so a run is reproducible end to end and
each environment sees an independent stream.

Rewards are scaled by RETURN_SCALE before advantage estimation to keep
value targets O(1); logged rewards are unscaled.
"""
from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .agent import Agent, PpoConfig, compute_gae, load_checkpoint, save_checkpoint
from .curriculum import CurriculumSpec, preset
from .hand import default_skeleton
from .nets import NetConfig
from .physics import SHAPE_IDS
from .scenario import generate_scenario, run_episode

RETURN_SCALE = 0.1
DIVERGENCE_ESR = 0.10          # early-term fraction above 90%
DIVERGENCE_PATIENCE = 50       # consecutive epochs before halting

# wall time stays out of the CSV so equal-seed runs produce identical logs
CSV_FIELDS = [
    "epoch", "phase", "mean_r", "mean_rf", "mean_rp", "esr",
    "policy_loss", "value_loss", "entropy", "clip_frac", "grad_norm",
    "frames",
]


@dataclass
class TrainConfig:
    out_dir: str
    curriculum: str = "C1"
    total_epochs: int = 2400
    n_envs: int = 16
    seed: int = 0
    proximity_reward: bool = True     # False = force-reward-only ablation
    encoder_bypass: bool = False      # True = raw non-voxel blocks into trunk
    fixed_trigger: float = None
    shapes: tuple = None              # e.g. ("sphere",); None = all
    strict_termination: bool = False
    checkpoint_every: int = 200
    resume: str = None
    ppo: PpoConfig = field(default_factory=PpoConfig)

    def shape_ids(self):
        if self.shapes is None:
            return None
        return [SHAPE_IDS[s] for s in self.shapes]


def _scenario_seed(run_seed: int, epoch: int, env: int) -> int:
    return int(np.random.SeedSequence([run_seed, epoch, env]).generate_state(1, np.uint64)[0])


def relaxed_pose_bias(skeleton) -> tuple:
    """Raw-space policy bias for a slightly-open start posture.

    Fresh policies otherwise command mid-range targets, which snaps the
    fingers shut at release and bats the object away before any learning
    can happen. Half the distance toward the zero-angle pose keeps tanh
    gradients alive while starting in the safe regime.
    """
    lo = skeleton.dof_limits[:, 0]
    hi = skeleton.dof_limits[:, 1]
    squashed = 2.0 * (0.0 - lo) / (hi - lo) - 1.0
    return tuple(np.arctanh(np.clip(squashed, -0.5, 0.5)))


def rollout(agent: Agent, script, skeleton, rng, strict_termination=False):
    """One episode with sampled actions; returns (result, trajectory dict)."""
    traj = {"obs": [], "raw": [], "logp": [], "value": []}

    def policy(obs):
        squashed, raw, logp, value = agent.act(obs, rng)
        traj["obs"].append(obs.astype(np.float32))
        traj["raw"].append(raw)
        traj["logp"].append(logp)
        traj["value"].append(value)
        return squashed

    result = run_episode(script, policy, skeleton=skeleton, strict_termination=strict_termination)
    return result, traj


def train(config: TrainConfig, progress=None) -> dict:
    """Run the configured training; returns a summary dict.

    progress, if given, is called as progress(epoch, row_dict) after each
    epoch (the CLI uses it for console output).
    """
    os.makedirs(config.out_dir, exist_ok=True)
    cur: CurriculumSpec = preset(config.curriculum)
    skeleton = default_skeleton()

    start_epoch = 0
    if config.resume:
        agent, extra = load_checkpoint(config.resume)
        start_epoch = int(extra.get("epoch", -1)) + 1
        agent.net.config.encoder_bypass = bool(config.encoder_bypass)
    else:
        agent = Agent(
            net_config=NetConfig(
                encoder_bypass=config.encoder_bypass,
                mean_bias=relaxed_pose_bias(skeleton),
            ),
            ppo=config.ppo,
            seed=config.seed,
        )

    action_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 101, start_epoch]))
    update_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 202, start_epoch]))

    with open(os.path.join(config.out_dir, "config.json"), "w") as fh:
        d = dict(config.__dict__)
        d["ppo"] = config.ppo.to_dict()
        json.dump(d, fh, indent=2, default=str)

    log_path = os.path.join(config.out_dir, "train_log.csv")
    log_fh = open(log_path, "a", newline="")
    writer = csv.DictWriter(log_fh, fieldnames=CSV_FIELDS)
    if start_epoch == 0:
        writer.writeheader()

    divergence_streak = 0
    halted = None
    shapes = config.shape_ids()
    epoch = start_epoch

    try:
        for epoch in range(start_epoch, config.total_epochs):
            t0 = time.time()
            phase = cur.phase_at(epoch)
            # the schedule owns the noise scale; any optimizer drift of
            # log_std is overwritten here every epoch
            frac = min(epoch / max(config.total_epochs - 1, 1), 1.0)
            sigma = config.ppo.sigma_init + (config.ppo.sigma_final - config.ppo.sigma_init) * frac
            agent.net.params["log_std"].data[:] = np.log(sigma)
            if epoch > start_epoch and epoch in cur.boundaries():
                save_checkpoint(
                    os.path.join(config.out_dir, f"phase_{cur.phase_at(epoch - 1).name}.npz"),
                    agent,
                    {"epoch": epoch - 1, "phase": cur.phase_at(epoch - 1).name},
                )

            buf = {"obs": [], "raw": [], "logp": [], "adv": [], "ret": []}
            ep_r, ep_rf, ep_rp, n_done, n_frames = [], [], [], 0, 0
            for env in range(config.n_envs):
                script = generate_scenario(
                    _scenario_seed(config.seed, epoch, env),
                    phase.switches,
                    shapes=shapes,
                    fixed_trigger=config.fixed_trigger,
                )
                result, traj = rollout(
                    agent, script, skeleton, action_rng,
                    strict_termination=config.strict_termination,
                )
                rewards = np.array(
                    [rec.r if config.proximity_reward else rec.r_f for rec in result.records]
                )
                values = np.array(traj["value"])
                # frame-cap truncation bootstraps the critic; a lost object is
                # a real terminal state and gets zero
                bootstrap = 0.0 if result.early_terminated else float(values[-1])
                adv, ret = compute_gae(
                    rewards * RETURN_SCALE, values,
                    config.ppo.gamma, config.ppo.lam, bootstrap,
                )
                buf["obs"].extend(traj["obs"])
                buf["raw"].extend(traj["raw"])
                buf["logp"].extend(traj["logp"])
                buf["adv"].extend(adv)
                buf["ret"].extend(ret)
                # mean_r is the reward actually optimized, so the
                # force-only ablation logs r identical to r_f
                ep_r.append(float(rewards.mean()))
                ep_rf.append(result.mean_rf)
                ep_rp.append(result.mean_rp)
                n_done += 0 if result.early_terminated else 1
                n_frames += result.frames_completed

            batch = {k: np.asarray(v) for k, v in buf.items()}
            try:
                stats = agent.ppo_update(batch, update_rng)
            except FloatingPointError as err:
                halted = f"non-finite loss at epoch {epoch}: {err}"
                break

            esr = n_done / config.n_envs
            if cur.phase_index(epoch) >= 1 and esr < DIVERGENCE_ESR:
                divergence_streak += 1
                if divergence_streak >= DIVERGENCE_PATIENCE:
                    halted = (
                        f"episode success below {DIVERGENCE_ESR:.0%} for "
                        f"{DIVERGENCE_PATIENCE} consecutive epochs (epoch {epoch})"
                    )
                    break
            else:
                divergence_streak = 0

            row = {
                "epoch": epoch,
                "phase": phase.name,
                "mean_r": round(float(np.mean(ep_r)), 6),
                "mean_rf": round(float(np.mean(ep_rf)), 6),
                "mean_rp": round(float(np.mean(ep_rp)), 6),
                "esr": round(esr, 4),
                "policy_loss": round(stats["policy_loss"], 6),
                "value_loss": round(stats["value_loss"], 6),
                "entropy": round(stats["entropy"], 4),
                "clip_frac": round(stats["clip_frac"], 4),
                "grad_norm": round(stats["grad_norm"], 4),
                "frames": n_frames,
            }
            writer.writerow(row)
            log_fh.flush()
            if progress is not None:
                progress(epoch, {**row, "wall_s": round(time.time() - t0, 3)})

            if config.checkpoint_every and (epoch + 1) % config.checkpoint_every == 0:
                save_checkpoint(
                    os.path.join(config.out_dir, f"ck_{epoch + 1:06d}.npz"),
                    agent,
                    {"epoch": epoch, "phase": phase.name},
                )
    finally:
        log_fh.close()

    final_path = os.path.join(config.out_dir, "halted.npz" if halted else "final.npz")
    save_checkpoint(final_path, agent, {"epoch": epoch, "phase": cur.phase_at(epoch).name})

    return {
        "epochs_run": epoch + 1 - start_epoch,
        "halted": halted,
        "checkpoint": final_path,
        "log": log_path,
        "backend": kernels.BACKEND,
    }
