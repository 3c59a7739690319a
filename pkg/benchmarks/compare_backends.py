#!/usr/bin/env python3
"""Benchmark the compiled kernel against the pure-NumPy fallback.

Runs the same seeded replication through both backends, checks the
outputs agree, and reports throughput in particle-steps per second.

    python benchmarks/compare_backends.py [--M 20000] [--threads N]
"""

import argparse
import time

import numpy as np

from valor import ChannelParams, SimConfig
from valor.backend import HAVE_COMPILED, resolve_threads
from valor.simulate import _plan_points, run_replication


def workload(M: int) -> tuple[ChannelParams, SimConfig]:
    channel = ChannelParams(D=300.0, r_v=5.0, v_avg=2000.0, l=500.0, w=1.0)
    cfg = SimConfig(M=M, dt=1e-4, seed=42)
    return channel, cfg


def timed(channel, cfg, backend, n_threads):
    t0 = time.perf_counter()
    rec = run_replication(channel, cfg, 0, backend=backend, n_threads=n_threads)
    return time.perf_counter() - t0, rec


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--M", type=int, default=20_000, help="molecules")
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()

    channel, cfg = workload(args.M)
    _, _, _, _, last_rec, _ = _plan_points([channel], cfg)
    # upper bound: the kernels drop molecules once they pass the receiver
    psteps = args.M * int(last_rec[0])
    nt = resolve_threads(args.threads)

    print(f"workload: M={args.M}, {int(last_rec[0])} steps, "
          f"<= {psteps / 1e9:.2f}G particle-steps")

    results = {}
    t_np, rec_np = timed(channel, cfg, "numpy", 1)
    results["numpy"] = t_np
    print(f"numpy                : {t_np:8.2f} s   {psteps / t_np / 1e6:8.1f} Mpsteps/s")

    if HAVE_COMPILED:
        for threads in sorted({1, nt}):
            t_c, rec_c = timed(channel, cfg, "compiled", threads)
            results[f"compiled t{threads}"] = t_c
            print(f"compiled ({threads:2d} thread) : {t_c:8.2f} s   "
                  f"{psteps / t_c / 1e6:8.1f} Mpsteps/s   "
                  f"{t_np / t_c:6.1f}x vs numpy")
            if not np.array_equal(rec_c.counts, rec_np.counts):
                diff = int(np.abs(rec_c.counts.astype(np.int64)
                                  - rec_np.counts.astype(np.int64)).sum())
                print(f"  note: counts differ from numpy by {diff} total "
                      "(boundary-coincidence rounding)")
    else:
        print("compiled kernel not available; install with a C toolchain")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
