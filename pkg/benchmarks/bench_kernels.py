"""Timing comparison of the two rejection-accumulate kernels.

Runs the compiled extension and the pure-Python fallback on identical
batches, checks they agree, and reports per-sample cost and speedup.

    python3 benchmarks/bench_kernels.py --sizes 1000,10000,100000
"""

from __future__ import annotations

import argparse
import math
import timeit

import numpy as np

from rfpe_lab import _kernels_py

try:
    from rfpe_lab import _kernels
except ImportError:
    _kernels = None


def _case(n: int, rng: np.random.Generator):
    """One update-shaped workload: tight-ish prior, moderate m."""
    mu, sigma = 3.0, 0.2
    samples = rng.normal(mu, sigma, size=n)
    uniforms = rng.random(n)
    return samples, uniforms, 1, 7.0, 2.9, 1.0, mu


def _check_agreement(args) -> None:
    a = _kernels_py.rejection_accumulate(*args)
    b = _kernels.rejection_accumulate(*args)
    if a[0] != b[0]:
        raise AssertionError(f"acceptance counts differ: {a[0]} vs {b[0]}")
    for x, y in zip(a[1:], b[1:]):
        if not math.isclose(x, y, rel_tol=1e-12, abs_tol=1e-12):
            raise AssertionError(f"moment mismatch: {a} vs {b}")


def _time(fn, args, repeat: int, number: int) -> float:
    return min(timeit.repeat(lambda: fn(*args), repeat=repeat, number=number)) / number


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="benchmark the rejection-accumulate kernels")
    parser.add_argument("--sizes", default="1000,10000,100000",
                        help="comma-separated batch sizes")
    parser.add_argument("--repeat", type=int, default=5,
                        help="timing repeats (best is reported)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if _kernels is None:
        print("compiled kernel unavailable; only timing the pure-Python path")

    sizes = [int(s) for s in args.sizes.split(",") if s]
    rng = np.random.default_rng(args.seed)
    print(f"{'n':>8}  {'python (us)':>12}  {'compiled (us)':>14}  {'speedup':>8}")
    for n in sizes:
        case = _case(n, rng)
        number = max(1, 200_000 // n)
        t_py = _time(_kernels_py.rejection_accumulate, case, args.repeat, number)
        if _kernels is None:
            print(f"{n:>8}  {t_py * 1e6:>12.1f}  {'-':>14}  {'-':>8}")
            continue
        _check_agreement(case)
        t_cy = _time(_kernels.rejection_accumulate, case, args.repeat, number)
        print(f"{n:>8}  {t_py * 1e6:>12.1f}  {t_cy * 1e6:>14.1f}  "
              f"{t_py / t_cy:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
