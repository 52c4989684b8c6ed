"""Benchmark the forward-backward kernel: compiled extension vs NumPy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeats N]

Generates batched chain workloads of increasing size and times both backends
on identical inputs, verifying that their outputs agree.
"""

import argparse
import time

import numpy as np

from spanweak import _kernels_py, kernels


def workload(rng, n_chains, mean_len, K):
    lengths = rng.integers(max(1, mean_len // 2), mean_len * 2, size=n_chains)
    offsets = np.zeros(n_chains + 1, dtype=np.int64)
    offsets[1:] = np.cumsum(lengths)
    n = int(offsets[-1])
    b = rng.uniform(0.05, 1.0, size=(n, K))
    mu = rng.dirichlet(np.ones(K))
    T = rng.dirichlet(np.ones(K), size=K)
    return b, mu, T, offsets


def time_backend(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if not kernels.USING_COMPILED:
        print("note: compiled extension unavailable; timing the fallback only")

    rng = np.random.default_rng(0)
    cases = [
        ("100 chains x ~30 tokens, K=3", workload(rng, 100, 30, 3)),
        ("800 chains x ~30 tokens, K=3", workload(rng, 800, 30, 3)),
        ("800 chains x ~30 tokens, K=5", workload(rng, 800, 30, 5)),
        ("3000 chains x ~60 tokens, K=3", workload(rng, 3000, 60, 3)),
    ]
    header = f"{'case':35s} {'pure (ms)':>10s} {'compiled (ms)':>14s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    for name, case in cases:
        t_pure, (g1, x1, l1) = time_backend(
            _kernels_py.forward_backward, case, args.repeats)
        if kernels.USING_COMPILED:
            from spanweak._core import forward_backward as compiled
            t_comp, (g2, x2, l2) = time_backend(compiled, case, args.repeats)
            assert np.allclose(g1, g2, atol=1e-10) and abs(l1 - l2) < 1e-8
            print(f"{name:35s} {t_pure * 1e3:10.2f} {t_comp * 1e3:14.2f} "
                  f"{t_pure / t_comp:7.1f}x")
        else:
            print(f"{name:35s} {t_pure * 1e3:10.2f} {'-':>14s} {'-':>8s}")


if __name__ == "__main__":
    main()
