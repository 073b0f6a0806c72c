"""Compare the numba and pure-numpy epidemic kernels.

    python benchmarks/bench_kernels.py --runs 300 --r0 1.4 2.4

Both kernels are fed identical generator states; the script checks that
every result matches and reports mean wall time per simulation.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from epibandit._accel import HAVE_NUMBA
from epibandit.episim import default_scenario, enumerate_strategies, simulate


def time_kernel(scenario, strategies, runs, seed, use_numba):
    results = []
    start = time.perf_counter()
    for i in range(runs):
        rng = np.random.default_rng([seed, i])
        results.append(simulate(scenario, strategies[i % len(strategies)], rng, use_numba=use_numba))
    return results, (time.perf_counter() - start) / runs


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--runs", type=int, default=300)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--r0", type=float, nargs="+", default=[1.4, 2.4])
    args = parser.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not installed; nothing to compare")
        return 1

    strategies = enumerate_strategies()
    print(f"{'r0':>5} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8} {'identical':>10}")
    for r0 in args.r0:
        scenario = default_scenario(r0=r0).calibrated()
        # compile outside the timed region
        simulate(scenario, strategies[0], np.random.default_rng(0), use_numba=True)
        jit, t_jit = time_kernel(scenario, strategies, args.runs, args.seed, True)
        ref, t_ref = time_kernel(scenario, strategies, args.runs, args.seed, False)
        same = jit == ref
        print(f"{r0:>5.2f} {1e3 * t_jit:>10.3f} {1e3 * t_ref:>10.3f} {t_ref / t_jit:>8.1f} {str(same):>10}")
        if not same:
            return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
