"""Backend benchmark: compiled kernels vs the numpy fallback.

Times the five kernel entry points on workloads shaped like real
simulation traffic, plus one full scripted episode end to end with each
backend. Run as `python -m griplab.bench [--repeats N]`.
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from . import kernels
from .hand import default_skeleton

EPISODE_SNIPPET = """
import numpy as np, time
from griplab.scenario import generate_scenario, FactorSwitches, run_episode
sc = generate_scenario(7, FactorSwitches(True, False, False), fixed_trigger=0.6)
def policy(obs):
    a = -np.ones(23); a[2:8] = 0.2
    a[[9, 13, 17, 21]] = 0.6; a[[10, 14, 18, 22]] = 0.6
    return a
run_episode(sc, policy)
t0 = time.time()
res = run_episode(sc, policy)
print((time.time() - t0) / res.frames_completed)
"""


def _workloads(seed=0):
    rng = np.random.default_rng(seed)
    skel = default_skeleton()
    ext = np.array([0.03, 0.045, 0.02])
    pos = np.array([0.04, 0.0, -0.06])
    quat = rng.standard_normal(4)
    quat /= np.linalg.norm(quat)
    queries = rng.uniform(-0.1, 0.1, (23, 3))
    centers = rng.uniform(-0.1, 0.1, (450, 3))
    p0 = rng.uniform(-0.1, 0.1, (19, 3))
    p1 = p0 + rng.uniform(-0.05, 0.05, (19, 3))
    q = rng.uniform(skel.dof_limits[:, 0], skel.dof_limits[:, 1])

    C, D = 12, 23
    sweep_args = dict(
        dt=1 / 120, kn=5000.0, cn=50.0, mu=0.8, n_iters=4, slop=5e-4, v_pushout=0.2,
        qdot=rng.standard_normal(D), m_inv_dof=np.full(D, 1e3),
        v=rng.standard_normal(3), omega=rng.standard_normal(3),
        inv_mass=100.0, iinv_world=np.eye(3) * 1e4, obj_pos=pos,
        side=np.zeros(C, dtype=np.int64), x=rng.uniform(-0.05, 0.05, (C, 3)) + pos,
        n=np.tile(np.array([0.0, 0.0, 1.0]), (C, 1)),
        depth=rng.uniform(0, 2e-3, C), jac=rng.standard_normal((C, D, 3)) * 0.05,
        base_vel=rng.standard_normal((C, 3)) * 0.1,
    )

    def fk_args(be):
        return lambda: be.fk_hand(
            skel.parents, skel.offsets, skel.rest_quat, skel.dof_axis,
            skel.joint_dof_start, skel.joint_dof_count, skel.tip_parent,
            skel.tip_offset, np.zeros(3), np.array([1.0, 0, 0, 0]), q,
        )

    return [
        ("closest_points (23 queries)", lambda be: lambda: be.closest_points(2, ext, pos, quat, queries)),
        ("occupancy (450 centers)", lambda be: lambda: be.occupancy(0, ext, pos, quat, centers)),
        ("capsule_closest (19 segs)", lambda be: lambda: be.capsule_closest(2, ext, pos, quat, p0, p1, 0.013)),
        ("fk_hand (23 dof)", fk_args),
        ("contact_sweep (12 contacts)", lambda be: lambda: be.contact_sweep(**sweep_args)),
    ]


def _time(fn, repeats: int) -> float:
    fn()
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(50):
            fn()
        best = min(best, (time.perf_counter() - t0) / 50)
    return best


def run_benchmark(repeats: int = 5, stream=sys.stdout):
    backends = {}
    for name in ("numpy", "ext"):
        try:
            backends[name] = kernels.get_backend(name)
        except ImportError:
            print(f"backend {name}: not available", file=stream)
    rows = []
    for label, make in _workloads():
        times = {name: _time(make(be), repeats) for name, be in backends.items()}
        rows.append((label, times))

    print(f"{'kernel':<30} " + " ".join(f"{n + ' (us)':>14}" for n in backends) + f" {'speedup':>9}", file=stream)
    for label, times in rows:
        cells = " ".join(f"{times[n] * 1e6:>14.1f}" for n in backends)
        if "numpy" in times and "ext" in times:
            ratio = f"{times['numpy'] / times['ext']:>8.1f}x"
        else:
            ratio = "n/a"
        print(f"{label:<30} {cells} {ratio:>9}", file=stream)

    print("\nfull episode, ms per control frame:", file=stream)
    per_frame = {}
    for name in backends:
        env = dict(os.environ, GRIPLAB_BACKEND=name)
        out = subprocess.run(
            [sys.executable, "-c", EPISODE_SNIPPET], capture_output=True, text=True, env=env
        )
        if out.returncode != 0:
            print(f"  {name}: failed: {out.stderr.strip().splitlines()[-1]}", file=stream)
            continue
        per_frame[name] = float(out.stdout.strip()) * 1e3
        print(f"  {name}: {per_frame[name]:.2f}", file=stream)
    if len(per_frame) == 2:
        print(f"  end-to-end speedup: {per_frame['numpy'] / per_frame['ext']:.1f}x", file=stream)
    return rows, per_frame


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args(argv)
    run_benchmark(repeats=args.repeats)
    return 0


if __name__ == "__main__":
    sys.exit(main())
