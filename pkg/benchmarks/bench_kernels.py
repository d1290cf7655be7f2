#!/usr/bin/env python3
"""Benchmark the numba and pure-numpy kernel paths against each other
(and a pure-Python baseline for scale).

Usage: python benchmarks/bench_kernels.py [--rows N] [--repeat K]

The two library paths must agree bit-for-bit; this script asserts that
while timing them. Set CAMPUSCLOUD_KERNELS=numpy to see what the package
falls back to without numba.
"""

import argparse
import random
import time

import numpy as np

from campuscloud import kernels

MASK = (1 << 64) - 1


def fnv_python(keys):
    out = []
    for key in keys:
        h = 14695981039346656037
        for b in key:
            h = ((h ^ b) * 1099511628211) & MASK
        out.append(h)
    return out


def timeit(fn, repeat):
    best = float("inf")
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def bench_fnv(rows, repeat):
    rng = random.Random(42)
    keys = [f"n{rng.randint(1, 64)}:obj-{i}".encode() for i in range(rows)]
    mat, lengths = kernels.encode_keys(keys)

    if kernels.USING_NUMBA:
        kernels.fnv1a64_scores_numba(mat[:2], lengths[:2])  # compile outside timing

    t_np, r_np = timeit(lambda: kernels.fnv1a64_scores_numpy(mat, lengths), repeat)
    rows_s = rows / t_np
    print(f"fnv1a64  numpy   {t_np * 1e3:8.2f} ms  ({rows_s / 1e6:6.2f} M keys/s)")
    if kernels.USING_NUMBA:
        t_nb, r_nb = timeit(lambda: kernels.fnv1a64_scores_numba(mat, lengths), repeat)
        assert np.array_equal(r_np, r_nb), "kernel paths disagree"
        print(f"fnv1a64  numba   {t_nb * 1e3:8.2f} ms  ({rows / t_nb / 1e6:6.2f} M keys/s)"
              f"  [{t_np / t_nb:4.1f}x vs numpy]")
    if rows <= 200_000:
        t_py, r_py = timeit(lambda: fnv_python(keys), 1)
        assert [int(x) for x in r_np] == r_py, "numpy path disagrees with python"
        print(f"fnv1a64  python  {t_py * 1e3:8.2f} ms  ({rows / t_py / 1e6:6.2f} M keys/s)")


def bench_rollup(rows, repeat):
    rng = np.random.default_rng(7)
    n_nodes = 64
    ticks = rng.integers(0, 10_000, rows).astype(np.int64)
    idx = rng.integers(0, n_nodes, rows).astype(np.int64)
    sizes = rng.integers(1, 1 << 30, rows).astype(np.int64)

    if kernels.USING_NUMBA:
        kernels.usage_rollup_numba(ticks[:2], idx[:2], sizes[:2], 0, 1, n_nodes)

    t_np, r_np = timeit(lambda: kernels.usage_rollup_numpy(ticks, idx, sizes, 100, 9000, n_nodes), repeat)
    print(f"rollup   numpy   {t_np * 1e3:8.2f} ms  ({rows / t_np / 1e6:6.2f} M entries/s)")
    if kernels.USING_NUMBA:
        t_nb, r_nb = timeit(lambda: kernels.usage_rollup_numba(ticks, idx, sizes, 100, 9000, n_nodes), repeat)
        assert np.array_equal(r_np, r_nb), "rollup paths disagree"
        print(f"rollup   numba   {t_nb * 1e3:8.2f} ms  ({rows / t_nb / 1e6:6.2f} M entries/s)"
              f"  [{t_np / t_nb:4.1f}x vs numpy]")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=500_000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    print(f"kernel selection: {'numba' if kernels.USING_NUMBA else 'numpy'} "
          f"(CAMPUSCLOUD_KERNELS overrides)")
    print(f"rows: {args.rows}, best of {args.repeat}\n")
    bench_fnv(args.rows, args.repeat)
    print()
    bench_rollup(args.rows, args.repeat)


if __name__ == "__main__":
    main()
