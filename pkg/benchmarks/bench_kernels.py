"""Benchmark the numba kernels against the pure-numpy fallback.

Run: python benchmarks/bench_kernels.py [--repeats 200]

Shapes mirror the real training workloads: the two conv/pool stages of
the dim-64 synthetic pipeline and the first stage of a dim-1024
embedding model, at batch size 32.
"""

import argparse
import time

import numpy as np

from collm.kernels import numba_backend, numpy_backend

CASES = [
    # (label, batch, c_in, c_out, length, kernel)
    ("conv stage1 dim64", 32, 1, 32, 64, 3),
    ("conv stage2 dim64", 32, 32, 64, 31, 3),
    ("conv stage1 dim1024", 32, 1, 32, 1024, 3),
    ("conv stage2 dim1024", 32, 32, 64, 511, 3),
]


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_case(label, batch, c_in, c_out, length, kernel, repeats):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((batch, c_in, length)).astype(np.float32)
    w = rng.standard_normal((c_out, c_in, kernel)).astype(np.float32)
    b = rng.standard_normal(c_out).astype(np.float32)
    dy = rng.standard_normal((batch, c_out, length - kernel + 1)).astype(np.float32)

    rows = []
    for op, np_fn, nb_fn in (
        ("forward",
         lambda: numpy_backend.conv1d_forward(x, w, b),
         lambda: numba_backend.conv1d_forward(x, w, b)),
        ("backward_w",
         lambda: numpy_backend.conv1d_backward_weight(dy, x, kernel),
         lambda: numba_backend.conv1d_backward_weight(dy, x, kernel)),
        ("backward_x",
         lambda: numpy_backend.conv1d_backward_input(dy, w, length),
         lambda: numba_backend.conv1d_backward_input(dy, w, length)),
    ):
        nb_fn()  # trigger compilation outside the timed region
        t_np = best_of(np_fn, repeats)
        t_nb = best_of(nb_fn, repeats)
        rows.append((f"{label} {op}", t_np, t_nb))
    return rows


def bench_pool(repeats):
    rng = np.random.default_rng(1)
    x = rng.standard_normal((32, 32, 62)).astype(np.float32)
    numba_backend.maxpool1d_forward(x, 2, 2)
    t_np = best_of(lambda: numpy_backend.maxpool1d_forward(x, 2, 2), repeats)
    t_nb = best_of(lambda: numba_backend.maxpool1d_forward(x, 2, 2), repeats)
    return [("maxpool 32x32x62", t_np, t_nb)]


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()

    rows = []
    for case in CASES:
        rows.extend(bench_case(*case, repeats=args.repeats))
    rows.extend(bench_pool(args.repeats))

    width = max(len(r[0]) for r in rows)
    print(f"{'case':<{width}}  {'numpy':>10}  {'numba':>10}  {'speedup':>8}")
    for label, t_np, t_nb in rows:
        print(f"{label:<{width}}  {t_np * 1e6:>8.1f}us  {t_nb * 1e6:>8.1f}us  "
              f"{t_np / t_nb:>7.2f}x")


if __name__ == "__main__":
    main()
