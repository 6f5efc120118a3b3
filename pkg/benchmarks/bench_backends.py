"""Compare the numba and pure-numpy sampler kernels.

Run with ``python3 benchmarks/bench_backends.py [--iters N] [--repeats R]``.
Each backend is warmed up once (this triggers numba compilation) before timing.
Both backends consume the same random stream, so short chains agree to
rounding; over long runs floating-point differences eventually flip an
accept/reject decision and the two chains separate, which is expected.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from benchsae.hb.model import HBModelSpec, McmcConfig, run_chain, sample_theta_rejection
from benchsae.kernels import numba_available
from benchsae.sim import default_sim_spec, simulate_dataset


def best_of(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--iters", type=int, default=2000, help="Gibbs sweeps per timed chain")
    parser.add_argument("--draws", type=int, default=100_000, help="rejection-sampler draws per timed call")
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    if not numba_available():
        print("numba is not installed; only the numpy backend can run")
        return

    data = simulate_dataset(default_sim_spec(seed=0))
    spec = HBModelSpec.from_dataset(data)
    config = McmcConfig(args.iters, burn_in=0, thin=1, seed=1)
    print(f"model: m={spec.n_areas}, N={spec.n_units}, p={spec.n_coef}; {args.iters} sweeps")

    results = {}
    for backend in ("numba", "numpy"):
        run_chain(spec, McmcConfig(10, seed=1), backend=backend)  # warm-up / compile
        t_chain = best_of(lambda: run_chain(spec, config, backend=backend), args.repeats)

        def draw():
            sample_theta_rejection(1.0, 0.3, 1.0, np.random.default_rng(0), size=args.draws, backend=backend)

        draw()
        t_draw = best_of(draw, args.repeats)
        print(f"{backend:>6}: chain {t_chain:8.3f} s ({1e6 * t_chain / args.iters:8.1f} us/sweep), "
              f"rejection sampler {t_draw:8.4f} s per {args.draws} draws")
        results[backend + "_time"] = t_chain

    print(f"speed-up (numpy / numba): {results['numpy_time'] / results['numba_time']:.1f}x")
    short = McmcConfig(50, seed=1)
    gap = np.max(np.abs(run_chain(spec, short, backend="numba").theta - run_chain(spec, short, backend="numpy").theta))
    print(f"max |theta_numba - theta_numpy| over a 50-sweep chain: {gap:.2e}")


if __name__ == "__main__":
    main()
