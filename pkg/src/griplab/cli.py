"""Command-line entry points: train / eval / replay / inspect-obs / serve."""
from __future__ import annotations

import argparse
import json
import os
import sys

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING_CHECKPOINT = 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="griplab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run curriculum PPO training")
    t.add_argument("--curriculum", default="C1")
    t.add_argument("--envs", type=int, default=16)
    t.add_argument("--epochs", type=int, default=2400)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", default="runs/train")
    t.add_argument("--fixed-trigger", type=float, default=None)
    t.add_argument("--shapes", default=None, help="comma list, e.g. sphere,cube")
    t.add_argument("--no-proximity-reward", action="store_true",
                   help="train on the force reward alone")
    t.add_argument("--encoder-bypass", action="store_true",
                   help="feed non-voxel observation groups to the trunk raw")
    t.add_argument("--strict-termination", action="store_true")
    t.add_argument("--checkpoint-every", type=int, default=200)
    t.add_argument("--resume", default=None)
    t.add_argument("--quiet", action="store_true")

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--episodes", type=int, default=200)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--trigger-variation", action="store_true")
    e.add_argument("--wrist-movement", action="store_true")
    e.add_argument("--no-object-randomization", action="store_true")
    e.add_argument("--shapes", default=None)
    e.add_argument("--fixed-trigger", type=float, default=None)
    e.add_argument("--strict-termination", action="store_true")
    e.add_argument("--out", default=None, help="report JSON path (default: stdout)")
    e.add_argument("--csv", default=None)
    e.add_argument("--scatter", default=None)

    r = sub.add_parser("replay", help="re-run a stored scenario script")
    r.add_argument("--script", required=True)
    r.add_argument("--checkpoint", required=True)
    r.add_argument("--strict-termination", action="store_true")
    r.add_argument("--out", default=None, help="result JSON path (default: stdout)")

    sub.add_parser("inspect-obs", help="print the observation layout manifest")

    s = sub.add_parser("serve", help="start the playground session service")
    s.add_argument("--checkpoint", default=None)
    s.add_argument("--config", default=None, help="JSON config file")
    s.add_argument("--host", default=None)
    s.add_argument("--port", type=int, default=None)
    s.add_argument("--scene", default=None, choices=["free-grip", "can-squeeze"])
    s.add_argument("--seed", type=int, default=None)
    return p


def _require_checkpoint(path: str) -> int:
    if not path or not os.path.exists(path):
        print(f"error: checkpoint not found: {path}", file=sys.stderr)
        return EXIT_MISSING_CHECKPOINT
    return EXIT_OK


def _cmd_train(args) -> int:
    from .trainer import TrainConfig, train

    if args.resume:
        status = _require_checkpoint(args.resume)
        if status:
            return status
    shapes = tuple(args.shapes.split(",")) if args.shapes else None
    cfg = TrainConfig(
        out_dir=args.out,
        curriculum=args.curriculum,
        total_epochs=args.epochs,
        n_envs=args.envs,
        seed=args.seed,
        proximity_reward=not args.no_proximity_reward,
        encoder_bypass=args.encoder_bypass,
        fixed_trigger=args.fixed_trigger,
        shapes=shapes,
        strict_termination=args.strict_termination,
        checkpoint_every=args.checkpoint_every,
        resume=args.resume,
    )

    def progress(epoch, row):
        print(
            f"epoch {epoch:5d} [{row['phase']}] r={row['mean_r']:.4f} "
            f"rf={row['mean_rf']:.4f} rp={row['mean_rp']:.4f} esr={row['esr']:.2f} "
            f"({row['wall_s']:.1f}s)",
            flush=True,
        )

    summary = train(cfg, progress=None if args.quiet else progress)
    print(json.dumps(summary))
    if summary["halted"]:
        print(f"error: training halted: {summary['halted']}", file=sys.stderr)
        return 1
    return EXIT_OK


def _policy_from_checkpoint(path):
    from .agent import load_checkpoint

    agent, _ = load_checkpoint(path)
    return agent.act_deterministic


def _cmd_eval(args) -> int:
    status = _require_checkpoint(args.checkpoint)
    if status:
        return status
    from .evaluation import evaluate, write_report
    from .scenario import FactorSwitches

    switches = FactorSwitches(
        object_randomization=not args.no_object_randomization,
        trigger_variation=args.trigger_variation,
        wrist_movement=args.wrist_movement,
    )
    shapes = None
    if args.shapes:
        from .physics import SHAPE_IDS

        shapes = [SHAPE_IDS[s] for s in args.shapes.split(",")]
    report = evaluate(
        _policy_from_checkpoint(args.checkpoint),
        args.episodes,
        switches,
        seed=args.seed,
        shapes=shapes,
        fixed_trigger=args.fixed_trigger,
        strict_termination=args.strict_termination,
    )
    if args.out:
        write_report(report, args.out, csv_path=args.csv, scatter_path=args.scatter)
        print(f"report written to {args.out}")
    else:
        print(json.dumps(report.to_dict(), indent=2))
    return EXIT_OK


def _cmd_replay(args) -> int:
    status = _require_checkpoint(args.checkpoint)
    if status:
        return status
    if not os.path.exists(args.script):
        print(f"error: script not found: {args.script}", file=sys.stderr)
        return 1
    from .scenario import run_episode, script_from_json

    with open(args.script) as fh:
        script = script_from_json(fh.read())
    result = run_episode(
        script,
        _policy_from_checkpoint(args.checkpoint),
        strict_termination=args.strict_termination,
    )
    doc = {
        "frames_completed": result.frames_completed,
        "early_terminated": result.early_terminated,
        "diagnostic": result.diagnostic,
        "records": [
            {
                "frame": rec.frame,
                "trigger": rec.trigger,
                "target_kgf": rec.target_kgf,
                "total_force_kgf": rec.total_force_kgf,
                "r_f": rec.r_f,
                "r_p": rec.r_p,
                "r": rec.r,
            }
            for rec in result.records
        ],
    }
    text = json.dumps(doc)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"result written to {args.out}")
    else:
        print(text)
    return EXIT_OK


def _cmd_inspect_obs(_args) -> int:
    from .sensing import OBS_DIM, layout_manifest

    print(f"{'block':<16} {'offset':>7} {'length':>7}")
    for name, offset, length in layout_manifest():
        print(f"{name:<16} {offset:>7} {length:>7}")
    print(f"{'total':<16} {'':>7} {OBS_DIM:>7}")
    return EXIT_OK


def _cmd_serve(args) -> int:
    from .service import load_service_config, serve

    cfg = load_service_config(args.config)
    if args.checkpoint is not None:
        cfg["checkpoint"] = args.checkpoint
    if args.host is not None:
        cfg["host"] = args.host
    if args.port is not None:
        cfg["port"] = args.port
    if args.scene is not None:
        cfg["scene"] = args.scene
    if args.seed is not None:
        cfg["seed"] = args.seed
    status = _require_checkpoint(cfg["checkpoint"])
    if status:
        return status
    serve(cfg["checkpoint"], host=cfg["host"], port=cfg["port"], scene=cfg["scene"], seed=cfg["seed"])
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    handlers = {
        "train": _cmd_train,
        "eval": _cmd_eval,
        "replay": _cmd_replay,
        "inspect-obs": _cmd_inspect_obs,
        "serve": _cmd_serve,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
