"""Benchmark the trajectory kernels: numba engine vs pure-numpy fallback.

Runs the same cocycle-integration workload in two subprocesses, one per
engine (the flag is read at import time), and prints steps/second for each
plus the speedup.

    python3 benchmarks/bench_kernels.py [--steps N] [--trajectories M]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json
import sys
import time

import numpy as np

from ruelle import _engine

steps = int(sys.argv[1])
trajectories = int(sys.argv[2])

widths = np.array([1.0, 2.0])
G = np.eye(4)
rng = np.random.default_rng(0)
z0s = rng.uniform(0.05, 0.3, size=(trajectories, 4))
checks = np.array([steps], dtype=np.int64)

# warm-up (JIT compile on the numba engine)
_engine.traj_lift(0, widths, 0.0, G, False, z0s[0], 0.1, 64, 100, np.array([64], dtype=np.int64), 1e-6)
_engine.traj_lift(1, widths, 0.5, G, False, z0s[0], 0.1, 64, 100, np.array([64], dtype=np.int64), 1e-6)

out = {"engine": _engine.ENGINE}
for name, kind, p in (("ellipsoid", 0, 0.0), ("pfamily", 1, 0.5)):
    t0 = time.perf_counter()
    for z0 in z0s:
        _engine.traj_lift(kind, widths, p, G, False, z0, 1.0, steps, 100, checks, 1e-6)
    dt = time.perf_counter() - t0
    out[name] = {"seconds": dt, "steps_per_s": steps * trajectories / dt}
print(json.dumps(out))
"""


def run_engine(flag, steps, trajectories):
    env = dict(os.environ, RUELLE_NUMBA=flag)
    proc = subprocess.run(
        [sys.executable, "-c", WORKER, str(steps), str(trajectories)],
        capture_output=True,
        text=True,
        env=env,
    )
    if proc.returncode != 0:
        raise SystemExit(proc.stderr)
    return json.loads(proc.stdout.splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--trajectories", type=int, default=8)
    args = ap.parse_args()

    numba = run_engine("1", args.steps, args.trajectories)
    numpy_ = run_engine("0", args.steps // 10, max(1, args.trajectories // 4))

    print(f"{'engine':<10}{'field':<12}{'steps/s':>14}")
    for res in (numba, numpy_):
        for field in ("ellipsoid", "pfamily"):
            print(f"{res['engine']:<10}{field:<12}{res[field]['steps_per_s']:>14.0f}")
    for field in ("ellipsoid", "pfamily"):
        speedup = numba[field]["steps_per_s"] / numpy_[field]["steps_per_s"]
        print(f"speedup   {field:<12}{speedup:>13.1f}x")


if __name__ == "__main__":
    main()
