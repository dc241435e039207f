#!/usr/bin/env python3
"""Compare the numba-jitted ML kernels against their pure-numpy fallbacks.

Times both implementations of every kernel on inputs large enough to matter
and checks that the outputs agree bitwise. Run with:

    python benchmarks/kernel_speed.py [--repeats N]
"""

import argparse
import time

import numpy as np

from mpbench import kernels


def _time(fn, args, repeats):
    fn(*args)  # warm-up / jit compile
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - start)
    return best, result


def _as_bytes(result):
    if isinstance(result, tuple):
        return b"".join(np.asarray(part).tobytes() for part in result)
    return np.asarray(result).tobytes()


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if not kernels.USE_NUMBA:
        print("numba path unavailable (MPBENCH_PURE_NUMPY set or numba missing)")
        return

    rng = np.random.default_rng(0)
    a = rng.uniform(-1, 1, (256, 192))
    b = rng.uniform(-1, 1, (192, 128))
    train_x = rng.normal(size=(2000, 20))
    train_y = rng.integers(0, 3, size=2000)
    test_x = rng.normal(size=(400, 20))
    points = rng.normal(size=(4000, 2))
    centroids = points[:: len(points) // 16][:16].copy()
    assign = rng.integers(0, 16, size=len(points))

    cases = [
        ("matmul_rows", kernels.matmul_rows, kernels._matmul_rows_np, (a, b)),
        (
            "knn_predict",
            kernels.knn_predict,
            kernels._knn_predict_np,
            (train_x, train_y, test_x, 5),
        ),
        (
            "kmeans_assign",
            kernels.kmeans_assign,
            kernels._kmeans_assign_np,
            (points, centroids),
        ),
        (
            "kmeans_accumulate",
            kernels.kmeans_accumulate,
            kernels._kmeans_accumulate_np,
            (points, assign, 16),
        ),
    ]

    print(f"{'kernel':<20}  {'numba (ms)':>12}  {'numpy (ms)':>12}  {'speedup':>8}  match")
    for name, jit_fn, np_fn, case_args in cases:
        jit_time, jit_out = _time(jit_fn, case_args, args.repeats)
        np_time, np_out = _time(np_fn, case_args, args.repeats)
        match = _as_bytes(jit_out) == _as_bytes(np_out)
        print(
            f"{name:<20}  {jit_time * 1e3:>12.3f}  {np_time * 1e3:>12.3f}  "
            f"{np_time / jit_time:>8.1f}  {'yes' if match else 'NO'}"
        )


if __name__ == "__main__":
    main()
