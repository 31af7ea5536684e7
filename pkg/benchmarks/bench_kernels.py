#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallbacks.

Runs each kernel pair on representative hot-path workloads and prints a
table of timings plus speedups.  Import-time backend selection is bypassed:
both implementations are called directly, so results do not depend on
EDGEVAULT_NO_NUMBA.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from edgevault import kernels
from edgevault.quasigroup import generate_quasigroup


def timeit(fn, *args, repeat=5):
    fn(*args)  # warm up (JIT compile / cache load)
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    if kernels.BACKEND != "numba":
        print("numba backend unavailable (EDGEVAULT_NO_NUMBA set or numba missing); "
              "nothing to compare")
        return

    rng = np.random.default_rng(0)
    q256 = generate_quasigroup(256, 1)
    q64 = generate_quasigroup(64, 1)

    # exhaustive identity sweep over all 64^2 pairs
    xs = np.repeat(np.arange(64, dtype=np.uint16), 64)
    ys = np.tile(np.arange(64, dtype=np.uint16), 64)

    # digit-wise share transform on a 1M-digit secret
    a = rng.integers(0, 256, size=1_000_000, dtype=np.uint16)
    b = rng.integers(0, 256, size=1_000_000, dtype=np.uint16)

    # bit packing of a 1 MiB secret at order 16 (4-bit digits)
    data = rng.integers(0, 256, size=1 << 20, dtype=np.uint8)
    count = data.shape[0] * 2
    digits4 = kernels.pack_pow2_numpy(data, 4, count)

    cases = [
        ("latin check n=256",
         kernels.latin_square_ok_numpy, (q256.table,),
         kernels.latin_square_ok_numba, (q256.table,)),
        ("identities n=64 exhaustive",
         kernels.identity_violations_numpy, (q64.table, q64.left_div, q64.right_div, xs, ys),
         kernels.identity_violations_numba, (q64.table, q64.left_div, q64.right_div, xs, ys)),
        ("pair lookup 1M digits",
         kernels.pair_lookup_numpy, (q256.table, a, b),
         kernels.pair_lookup_numba, (q256.table, a, b)),
        ("pack 1MiB -> 4-bit digits",
         kernels.pack_pow2_numpy, (data, 4, count),
         kernels.pack_pow2_numba, (data, 4, count)),
        ("unpack 4-bit digits -> 1MiB",
         kernels.unpack_pow2_numpy, (digits4, 4, data.shape[0]),
         kernels.unpack_pow2_numba, (digits4, 4, data.shape[0])),
    ]

    print(f"{'kernel':<30} {'numpy':>12} {'numba':>12} {'speedup':>9}")
    print("-" * 66)
    for name, np_fn, np_args, nb_fn, nb_args in cases:
        t_np = timeit(np_fn, *np_args, repeat=args.repeat)
        t_nb = timeit(nb_fn, *nb_args, repeat=args.repeat)
        print(f"{name:<30} {t_np * 1e3:>10.3f}ms {t_nb * 1e3:>10.3f}ms "
              f"{t_np / t_nb:>8.2f}x")


if __name__ == "__main__":
    main()
