#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Runs each hot kernel on panel-sized inputs and prints a timing table.
The numba backend pays a one-off JIT cost, excluded via a warmup call.

    python benchmarks/bench_kernels.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from hkprotest.kernels import load_backend


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def make_cases(rng):
    n_rows, n_cols = 300_000, 12
    values = rng.normal(size=(n_rows, n_cols))
    codes = rng.integers(0, 30, size=n_rows)
    vec_a = rng.normal(size=n_rows)
    vec_b = rng.normal(size=n_rows)
    returns = rng.normal(size=(2000, 246))
    returns[rng.random(returns.shape) < 0.05] = np.nan
    market = rng.normal(size=246)
    return {
        "group_demean (300k x 12, 30 groups)": lambda impl: impl.group_demean(values, codes, 30),
        "batch_simple_ols (2000 x 246)": lambda impl: impl.batch_simple_ols(returns, market, 60),
        "stable_dot (300k)": lambda impl: impl.stable_dot(vec_a, vec_b),
        "stable_sum (300k)": lambda impl: impl.stable_sum(vec_a),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    backends = {}
    for name in ("numpy", "numba"):
        try:
            backends[name] = load_backend(name)
        except ImportError:
            print(f"note: backend {name!r} unavailable, skipping")

    rng = np.random.default_rng(0)
    cases = make_cases(rng)

    # warmup triggers JIT compilation outside the timed region
    for impl in backends.values():
        for fn in cases.values():
            fn(impl)

    width = max(len(k) for k in cases)
    header = f"{'kernel':<{width}}" + "".join(f"  {name:>12}" for name in backends)
    if len(backends) == 2:
        header += f"  {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for label, fn in cases.items():
        times = {name: _time(lambda i=impl: fn(i), args.repeats) for name, impl in backends.items()}
        row = f"{label:<{width}}" + "".join(f"  {times[name] * 1e3:>10.2f}ms" for name in backends)
        if len(times) == 2:
            row += f"  {times['numpy'] / times['numba']:>8.1f}x"
        print(row)

    # the two backends must agree on a shared probe
    if len(backends) == 2:
        probe = rng.normal(size=(5000, 3))
        codes = rng.integers(0, 8, size=5000)
        a, _ = backends["numpy"].group_demean(probe, codes, 8)
        b, _ = backends["numba"].group_demean(probe, codes, 8)
        assert np.allclose(a, b, atol=1e-12)
        print("\nbackends agree on the probe instance")


if __name__ == "__main__":
    main()
