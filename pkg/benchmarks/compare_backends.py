"""Benchmark the numba-jitted hot kernels against the pure-numpy fallback.

Runs the three quadratic-time primitives (kernel halving, kernel thinning,
kernel herding) plus the MMD reduction on identical seeded inputs under both
backends, checks the outputs agree, and prints a timing table.

    python3 benchmarks/compare_backends.py [--n 4096] [--d 2] [--reps 3]
"""

import argparse
import time

import numpy as np

from compresspp import (KernelSpec, PointSeq, SeedPath,
                        active_backend, herding, kernel_halve, kt,
                        mmd_empirical, set_backend)
from compresspp.backend import HAVE_NUMBA


def time_call(fn, reps):
    best = float("inf")
    result = None
    for _ in range(reps):
        start = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - start)
    return best, result


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=4096,
                        help="input size (power of 4 recommended)")
    parser.add_argument("--d", type=int, default=2)
    parser.add_argument("--reps", type=int, default=3)
    args = parser.parse_args()

    if not HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    k = KernelSpec(2.0 * args.d)
    seed = SeedPath(0)
    s = PointSeq(seed.generator().standard_normal((args.n, args.d)))
    thin_factor = 16 if args.n % 16 == 0 else 2
    tasks = {
        "kernel_halve": lambda: kernel_halve(
            s, k, 0.5, seed.split(1)).selected.data,
        f"kt (factor {thin_factor})": lambda: kt(
            s, k, 0.5, thin_factor, seed.split(2)).data,
        "herding (to sqrt n)": lambda: herding(
            s, k, max(2, int(np.sqrt(args.n)))).data,
        "mmd_empirical (self)": lambda: mmd_empirical(
            k, s, PointSeq(s.data[: args.n // 2])),
    }

    print(f"n={args.n} d={args.d} reps={args.reps} (best-of timings)")
    header = f"{'task':<24}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, fn in tasks.items():
        # Warm the jitted path once so compile time never counts.
        set_backend("numba")
        fn()
        t_nb, out_nb = time_call(fn, args.reps)
        set_backend("numpy")
        t_np, out_np = time_call(fn, args.reps)
        set_backend("numba")
        agree = np.allclose(out_nb, out_np, rtol=1e-9, atol=1e-12)
        flag = "" if agree else "   OUTPUTS DIFFER"
        print(f"{name:<24}{t_nb:>12.4f}{t_np:>12.4f}"
              f"{t_np / max(t_nb, 1e-12):>9.1f}x{flag}")
    print(f"active backend restored: {active_backend()}")


if __name__ == "__main__":
    main()
