"""Benchmark of the tuple-counting backends (compiled core vs numpy fallback).

Usage: python benchmarks/bench_ustat.py [--sizes 2000,8000,32000] [--reps 3]

Clouds mimic the restricted-process geometry of the studies: a Gaussian
horizontal spread with an exponential vertical profile, at a density where
each point has a few dozen neighbors within the kernel radius.
"""

import argparse
import time

import numpy as np

from halfspace_ustats import EdgeKernel, SubgraphKernel, VRSimplexKernel, compute_S
from halfspace_ustats.ustats import default_backend


def make_cloud(n, rng):
    u = rng.standard_normal(n) * 3.0
    v = rng.exponential(1.0, n)
    return np.column_stack([u, v])


def time_backend(pts, kernel, r, backend, reps):
    best = float("inf")
    value = None
    for _ in range(reps):
        t0 = time.perf_counter()
        stat = compute_S(pts, kernel, r, backend=backend)
        best = min(best, time.perf_counter() - t0)
        value = stat.value
    return best, value


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", default="2000,8000,32000")
    parser.add_argument("--reps", type=int, default=3)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]
    rng = np.random.default_rng(0)
    kernels = [("edge", EdgeKernel(), 0.25),
               ("vr-triangle", VRSimplexKernel(2), 0.18),
               ("2-path", SubgraphKernel([[0, 1], [1, 2]]), 0.18)]
    have_compiled = True
    try:
        compute_S(np.zeros((2, 2)), EdgeKernel(), 1.0, backend="compiled")
    except ImportError:
        have_compiled = False
    print(f"default backend: {default_backend()}")
    header = f"{'kernel':<12} {'n':>7} {'python':>10} {'compiled':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, kernel, r in kernels:
        for n in sizes:
            pts = make_cloud(n, rng)
            t_py, v_py = time_backend(pts, kernel, r, "python", args.reps)
            if have_compiled:
                t_cy, v_cy = time_backend(pts, kernel, r, "compiled", args.reps)
                assert v_py == v_cy, "backends disagree"
                print(f"{name:<12} {n:>7} {t_py:>9.4f}s {t_cy:>9.4f}s "
                      f"{t_py / t_cy:>7.1f}x")
            else:
                print(f"{name:<12} {n:>7} {t_py:>9.4f}s {'-':>10} {'-':>8}")


if __name__ == "__main__":
    main()
