"""Benchmark the compiled polynomial kernel against the numpy fallback.

Run as: python benchmarks/bench_kernels.py [--points N] [--repeats R]
"""

import argparse
import time

import numpy as np

from contactfb.kernels import (
    USING_SPEEDUPS,
    poly_eval_many_compiled,
    poly_eval_many_numpy,
)


def bench(func, coeffs, points, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        func(coeffs, points)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--points", type=int, default=200000)
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    points = rng.standard_normal(args.points) + 1j * rng.standard_normal(args.points)

    print(f"compiled extension available: {USING_SPEEDUPS}")
    print(f"{'degree':>6} {'numpy (ms)':>12} {'compiled (ms)':>14} {'speedup':>8}")
    for degree in (2, 4, 8, 16, 32, 64):
        coeffs = rng.standard_normal(degree + 1) + 1j * rng.standard_normal(degree + 1)
        t_np = bench(poly_eval_many_numpy, coeffs, points, args.repeats)
        if USING_SPEEDUPS:
            t_c = bench(poly_eval_many_compiled, coeffs, points, args.repeats)
            v_np = poly_eval_many_numpy(coeffs, points)[0]
            v_c = poly_eval_many_compiled(coeffs, points)[0]
            scale = float(np.max(np.abs(v_np))) or 1.0
            err = float(np.max(np.abs(v_np - v_c))) / scale
            assert err < 1e-12, f"kernel mismatch: {err}"
            print(f"{degree:>6} {1e3 * t_np:>12.3f} {1e3 * t_c:>14.3f} "
                  f"{t_np / t_c:>7.2f}x")
        else:
            print(f"{degree:>6} {1e3 * t_np:>12.3f} {'n/a':>14} {'n/a':>8}")


if __name__ == "__main__":
    main()
