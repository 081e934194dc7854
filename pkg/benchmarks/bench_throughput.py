"""End-to-end frame throughput for statistical-channel frames of a fixed
sample count, on the numba and the numpy kernel paths.

Each backend runs in a fresh interpreter because ``RADIOFORGE_NUMBA`` is
read at import. Frames are independent, so an N-core rate is the
single-core rate times N (less pool start-up); ``--workers`` measures it
directly on machines that have the cores.

    python3 benchmarks/bench_throughput.py [--frames 16] [--samples 1000000] [--workers 1]
"""

import argparse
import json
import os
import subprocess
import sys
import tempfile
import time

CHILD = r"""
import json, sys, time
from radioforge._accel import USE_NUMBA
from radioforge.assemble import generate_frame, run_batch
from radioforge.config import config_from_dict
n, samples, workers, out = int(sys.argv[1]), int(sys.argv[2]), int(sys.argv[3]), sys.argv[4]
cfg = config_from_dict({"num_frames": n + 1, "channel": {"weights": {"statistical": 1.0, "raytrace": 0.0}},
                        "schedule": {"min_samples": samples, "max_samples": samples}})
generate_frame(cfg, n)  # JIT warm-up on a frame outside the timed range
t = time.perf_counter()
m = run_batch(cfg, range(n), workers=workers, out=out, resume=False)
dt = time.perf_counter() - t
print(json.dumps({"numba": USE_NUMBA, "scenarios": n, "recorded": m["total_frames"], "seconds": dt}))
"""


def run(backend, args):
    env = dict(os.environ, RADIOFORGE_NUMBA=backend)
    with tempfile.TemporaryDirectory() as out:
        r = subprocess.run([sys.executable, "-c", CHILD, str(args.frames), str(args.samples), str(args.workers), out],
                           env=env, capture_output=True, text=True, check=True)
    return json.loads(r.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=16, help="scenarios per backend")
    ap.add_argument("--samples", type=int, default=1_000_000)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--target-cores", type=int, default=8)
    args = ap.parse_args(argv)
    print(f"{args.frames} scenarios x {args.samples:.0e} samples, {args.workers} worker(s), "
          f"{os.cpu_count()} core(s) available")
    for backend in ("1", "0"):
        t0 = time.perf_counter()
        r = run(backend, args)
        per_min = 60 * r["scenarios"] / r["seconds"]
        per_core = per_min / max(1, min(args.workers, os.cpu_count() or 1))
        print(f"{'numba' if r['numba'] else 'numpy':>6}: {per_min:6.1f} scenarios/min "
              f"({60 * r['recorded'] / r['seconds']:.1f} recorded frames/min); "
              f"{per_core:.1f}/min/core -> {per_core * args.target_cores:.0f}/min on {args.target_cores} cores "
              f"[{time.perf_counter() - t0:.0f} s wall]")


if __name__ == "__main__":
    main()
