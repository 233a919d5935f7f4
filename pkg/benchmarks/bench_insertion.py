#!/usr/bin/env python3
"""Benchmark the insertion kernel: compiled extension vs pure-Python fallback.

The insertion evaluation is the simulator's hot inner loop (every request
triggers one call per candidate vehicle, and queued requests retry on every
fleet-state change), so this is the loop worth compiling.

Usage: python benchmarks/bench_insertion.py [--calls 2000]
"""

import argparse
import random
import time

import numpy as np

from odtsim.kernels import pure

try:
    from odtsim.kernels import _native
except ImportError:
    _native = None


def build_case(rng: random.Random, plan_len: int, n_stops: int = 200):
    tt = rng_matrix(rng, n_stops)
    stop_idx = np.array([rng.randrange(n_stops) for _ in range(plan_len)], dtype=np.int32)
    load_delta = np.empty(plan_len, dtype=np.int32)
    pair_pick = np.full(plan_len, -1, dtype=np.int32)
    board_time = np.zeros(plan_len, dtype=np.float64)
    onboard0 = 0
    k = 0
    while k < plan_len:
        if k + 1 < plan_len:
            g = rng.randint(1, 2)
            load_delta[k] = g
            load_delta[k + 1] = -g
            pair_pick[k + 1] = k
            k += 2
        else:
            load_delta[k] = -1
            board_time[k] = -120.0
            onboard0 += 1
            k += 1
    return (
        tt, rng.randrange(n_stops), 0.0, 30.0,
        stop_idx, load_delta, pair_pick, board_time,
        onboard0, 8,
        rng.randrange(n_stops), rng.randrange(n_stops), rng.randint(1, 4),
        1.5, 0.5, 0,
    )


def rng_matrix(rng: random.Random, n: int) -> np.ndarray:
    tt = np.asarray(
        [[0 if a == b else rng.randint(30, 900) for b in range(n)] for a in range(n)],
        dtype=np.int32,
    )
    return np.ascontiguousarray(tt)


def bench(fn, cases, repeats=3) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for case in cases:
            fn(*case)
        best = min(best, (time.perf_counter() - start) / len(cases))
    return best * 1e6  # microseconds per call


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--calls", type=int, default=2000, help="calls per plan size")
    args = parser.parse_args()

    rng = random.Random(7)
    print(f"{'plan legs':>9} | {'pure us/call':>12} | {'native us/call':>14} | {'speedup':>7}")
    print("-" * 55)
    for plan_len in (0, 2, 4, 8, 12, 16):
        cases = [build_case(rng, plan_len) for _ in range(max(20, args.calls // 50))]
        cases = (cases * (args.calls // len(cases) + 1))[: args.calls]
        pure_us = bench(pure.best_insertion, cases)
        if _native is not None:
            native_us = bench(_native.best_insertion, cases)
            agree = all(
                pure.best_insertion(*c) == _native.best_insertion(*c) for c in cases[:50]
            )
            assert agree, "backends disagree"
            print(f"{plan_len:>9} | {pure_us:>12.1f} | {native_us:>14.2f} | {pure_us / native_us:>6.1f}x")
        else:
            print(f"{plan_len:>9} | {pure_us:>12.1f} | {'(not built)':>14} | {'-':>7}")


if __name__ == "__main__":
    main()
