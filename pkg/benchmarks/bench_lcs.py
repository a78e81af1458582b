"""Benchmark the LCS kernel: numba @njit versus the pure-numpy fallback.

Sizes mirror real summary pairs (hundreds of tokens) up to long-context
inputs. Run: python benchmarks/bench_lcs.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from hcsum import _kernels


def bench(fn, a, b, warmup=1, repeat=5):
    for _ in range(warmup):
        fn(a, b)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(a, b)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    if not _kernels._HAS_NUMBA:
        print("numba not installed; only the numpy path is available")
        return

    rng = np.random.default_rng(0)
    cases = [
        ("summary pair  (300 x 500)", 300, 500),
        ("long summary  (1000 x 1500)", 1000, 1500),
        ("long context  (2000 x 3000)", 2000, 3000),
    ]
    print(f"{'case':<30} {'numpy':>12} {'numba':>12} {'speedup':>9}")
    for name, la, lb in cases:
        a = rng.integers(0, 2000, size=la).astype(np.int64)
        b = rng.integers(0, 2000, size=lb).astype(np.int64)
        assert _kernels._lcs_len_numpy(a, b) == int(_kernels._lcs_len_numba(a, b))
        t_np = bench(_kernels._lcs_len_numpy, a, b, repeat=args.repeat)
        t_nb = bench(_kernels._lcs_len_numba, a, b, repeat=args.repeat)
        print(f"{name:<30} {t_np * 1e3:>10.2f}ms {t_nb * 1e3:>10.2f}ms {t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
