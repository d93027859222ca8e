#!/usr/bin/env python3
"""Benchmark the likelihood kernels: numba path vs numpy fallback.

The kernels dominate the runtime of the inefficiency MLE (a few thousand
objective evaluations per fit, each a loop over firms), so this is the
comparison that decides whether the compiled path is worth keeping.

Usage:
    python benchmarks/bench_kernels.py [--firms 100 500 2000] [--loops 2000]
"""

import argparse
import time

import numpy as np

from groupsfa import _kernels


def make_inputs(n, seed=0):
    rng = np.random.default_rng(seed)
    S = rng.normal(-20, 15, size=n)
    Q = S ** 2 / 40 + rng.uniform(10, 200, size=n)
    sv2 = rng.uniform(0.3, 2.5, size=n)
    return S, Q, sv2


def bench(fn, args, loops):
    fn(*args)  # warmup / jit compile
    start = time.perf_counter()
    for _ in range(loops):
        fn(*args)
    return (time.perf_counter() - start) / loops


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--firms", type=int, nargs="+", default=[100, 500, 2000])
    ap.add_argument("--loops", type=int, default=2000)
    args = ap.parse_args()

    if _kernels.numba_backend is None:
        print("numba unavailable or disabled; only the numpy path is timed")

    rows = []
    for n in args.firms:
        S, Q, sv2 = make_inputs(n)
        uni_args = (S, Q, sv2, 50, 0.4, 0.9)
        mix_args = (S, Q, sv2, 50, 0.6, 0.8, 0.5, -1.1, 1.8)
        np_uni = bench(_kernels.numpy_backend["unique_total"], uni_args, args.loops)
        np_mix = bench(_kernels.numpy_backend["mixture_total"], mix_args, args.loops)
        if _kernels.numba_backend is not None:
            nb_uni = bench(_kernels.numba_backend["unique_total"], uni_args, args.loops)
            nb_mix = bench(_kernels.numba_backend["mixture_total"], mix_args, args.loops)
            rows.append((n, np_uni, nb_uni, np_uni / nb_uni,
                         np_mix, nb_mix, np_mix / nb_mix))
        else:
            rows.append((n, np_uni, None, None, np_mix, None, None))

    hdr = (f"{'N':>6} {'unique numpy':>14} {'unique numba':>14} {'speedup':>8} "
           f"{'mixture numpy':>14} {'mixture numba':>14} {'speedup':>8}")
    print(hdr)
    for n, a, b, r1, c, d, r2 in rows:
        fb = "-" if b is None else f"{b * 1e6:10.1f} us"
        fd = "-" if d is None else f"{d * 1e6:10.1f} us"
        fr1 = "-" if r1 is None else f"{r1:7.1f}x"
        fr2 = "-" if r2 is None else f"{r2:7.1f}x"
        print(f"{n:>6} {a * 1e6:11.1f} us {fb:>14} {fr1:>8} "
              f"{c * 1e6:11.1f} us {fd:>14} {fr2:>8}")


if __name__ == "__main__":
    main()
