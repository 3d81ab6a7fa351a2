#!/usr/bin/env python3
"""Benchmark the compiled shot-sampling kernel against the numpy fallback.

Both implementations share one contract and produce identical outcome masks
for identical inputs; this script times them on the workload that dominates
the large Monte Carlo runs (protocol shots on a Gaussian state) and verifies
the outputs agree bit for bit.

Usage: python benchmarks/kernel_bench.py [--shots 200000] [--modes 20]
"""

import argparse
import time

import numpy as np

from jointmeas.flo import random_orthogonal
from jointmeas.gaussian import random_gaussian_state
from jointmeas.kernels import HAVE_COMPILED, _gauss_py
from jointmeas.majorana import ModeCount


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--shots", type=int, default=200000)
    parser.add_argument("--modes", type=int, default=20, help="number of Majorana modes 2N")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if args.modes % 2:
        parser.error("--modes must be even")
    rng = np.random.default_rng(args.seed)
    state = random_gaussian_state(ModeCount(args.modes // 2), rng)
    rot = random_orthogonal(args.modes, rng)
    x_masks = rng.integers(0, 2**args.modes, size=args.shots, dtype=np.uint64)
    uniforms = rng.random((args.shots, args.modes // 2))

    timings = {}
    outputs = {}

    def bench(name, fn):
        fn(state.cov, rot.entries, x_masks[:1000], uniforms[:1000])  # warm-up
        start = time.perf_counter()
        outputs[name] = fn(state.cov, rot.entries, x_masks, uniforms)
        timings[name] = time.perf_counter() - start

    bench("numpy", _gauss_py.sample_rotated_shots)
    if HAVE_COMPILED:
        from jointmeas.kernels import _gauss_cy

        bench("cython", _gauss_cy.sample_rotated_shots)

    print(f"{args.shots} shots at 2N={args.modes}")
    for name, seconds in timings.items():
        rate = args.shots / seconds
        print(f"  {name:<8} {seconds:8.3f} s   ({rate:,.0f} shots/s)")
    if HAVE_COMPILED:
        identical = np.array_equal(outputs["numpy"], outputs["cython"])
        speedup = timings["numpy"] / timings["cython"]
        print(f"  speedup {speedup:.1f}x, outputs identical: {identical}")
        if not identical:
            return 1
    else:
        print("  compiled kernel not available; only the fallback was timed")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
