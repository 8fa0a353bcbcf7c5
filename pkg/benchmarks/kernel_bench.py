"""Benchmark the numba kernels against the pure-numpy fallback.

Runs each hot kernel (KS distance, 1-D Wasserstein, spline forward/inverse)
on synthetic data in both backends and prints per-call timings plus the
speedup. Numba compilation time is excluded by a warm-up call.

Usage:
    python benchmarks/kernel_bench.py [--size 100000] [--repeats 20]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from flowbench import kernels
from flowbench.splines import build_spline_params


def bench(fn, repeats: int) -> float:
    fn()  # warm-up (triggers numba compilation)
    return min(timeit.repeat(fn, number=1, repeat=repeats))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=100_000)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    a = np.sort(rng.standard_normal(args.size))
    b = np.sort(rng.standard_normal(args.size))

    knots, bound = 8, 16.0
    raw = rng.standard_normal((args.size, 3 * knots - 1))
    kx, ky, dv = build_spline_params(raw, knots, bound)
    x = rng.uniform(-15.0, 15.0, size=args.size)
    y, _ = kernels.spline_forward_numpy(x, kx, ky, dv, bound)

    cases = [
        ("ks_distance", lambda: kernels.ks_distance_numpy(a, b),
         lambda: kernels.ks_distance_numba(a, b)),
        ("wasserstein_1d", lambda: kernels.wasserstein_1d_numpy(a, b),
         lambda: kernels.wasserstein_1d_numba(a, b)),
        ("spline_forward", lambda: kernels.spline_forward_numpy(x, kx, ky, dv, bound),
         lambda: kernels.spline_forward_numba(x, kx, ky, dv, bound)),
        ("spline_inverse", lambda: kernels.spline_inverse_numpy(y, kx, ky, dv, bound),
         lambda: kernels.spline_inverse_numba(y, kx, ky, dv, bound)),
    ]

    print(f"size={args.size} repeats={args.repeats} "
          f"numba_available={kernels.HAVE_NUMBA}")
    print(f"{'kernel':<16}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>9}")
    for name, f_np, f_nb in cases:
        t_np = bench(f_np, args.repeats) * 1e3
        if kernels.HAVE_NUMBA:
            t_nb = bench(f_nb, args.repeats) * 1e3
            print(f"{name:<16}{t_np:>12.3f}{t_nb:>12.3f}{t_np / t_nb:>8.1f}x")
        else:
            print(f"{name:<16}{t_np:>12.3f}{'n/a':>12}{'':>9}")


if __name__ == "__main__":
    main()
