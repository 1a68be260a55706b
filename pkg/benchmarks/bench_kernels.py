"""Throughput comparison of the decode-step backends.

Times repeated single-step next-token distributions (the autoregressive
hot loop) for every available backend and prints a small table.

Usage: python3 benchmarks/bench_kernels.py [--steps N] [--repeats R]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from perfrl.policy import ByteTokenizer, PolicyParams
from perfrl.policy.kernels import available_backends


def bench_backend(fn, params: PolicyParams, windows: np.ndarray, repeats: int) -> float:
    """Best-of-`repeats` throughput in decode steps per second."""
    embed, w1, b1, w2, b2 = params.embed, params.w1, params.b1, params.w2, params.b2
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for window in windows:
            fn(embed, w1, b1, w2, b2, window)
        best = min(best, time.perf_counter() - start)
    return len(windows) / best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=5000, help="decode steps per trial")
    parser.add_argument("--repeats", type=int, default=5, help="trials per backend (best kept)")
    parser.add_argument("--context", type=int, default=8)
    parser.add_argument("--embed-dim", type=int, default=32)
    parser.add_argument("--hidden-dim", type=int, default=128)
    args = parser.parse_args()

    tok = ByteTokenizer()
    params = PolicyParams.initialize(
        tok.vocab_size, args.context, args.embed_dim, args.hidden_dim, seed=0
    )
    rng = np.random.default_rng(0)
    windows = rng.integers(0, tok.vocab_size, size=(args.steps, args.context))

    backends = available_backends()
    print(f"decode-step throughput ({args.steps} steps, best of {args.repeats} trials)")
    print(f"{'backend':<10} {'steps/s':>12} {'relative':>10}")
    rates = {name: bench_backend(fn, params, windows, args.repeats)
             for name, fn in backends.items()}
    base = rates.get("numpy", max(rates.values()))
    for name, rate in sorted(rates.items(), key=lambda kv: kv[1]):
        print(f"{name:<10} {rate:>12.0f} {rate / base:>9.2f}x")


if __name__ == "__main__":
    main()
