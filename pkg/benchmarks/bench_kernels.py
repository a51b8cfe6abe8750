"""Time the numba and numpy kernels on Monte Carlo-sized batches.

    python benchmarks/bench_kernels.py [--trials 100000] [--repeat 5]

Both backends get identical input arrays; results are checked for equality
before timings are printed.
"""

import argparse
import time

import numpy as np

from crowdcount import _kernels
from crowdcount.simulator import TrialConfig, run_monte_carlo


def best_of(func, args, repeat):
    func(*args)  # first call not timed, in case we need to jit
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        func(*args)
        times.append(time.perf_counter() - start)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=100_000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    backends = {"numpy": _kernels.NUMPY_KERNELS}
    if _kernels.NUMBA_KERNELS:
        backends["numba"] = _kernels.NUMBA_KERNELS
    else:
        print("numba unavailable; timing numpy only")

    rng = np.random.default_rng(0)
    print(f"{'X':>3} {'Y':>3} {'kernel':<22}" + "".join(f"{b:>12}" for b in backends))
    for X, Y in [(5, 1), (8, 2), (5, 6), (40, 10)]:
        starts = rng.integers(0, 4096, size=(args.trials, X))
        increments = rng.integers(1, 50, size=(args.trials, X, Y - 1))
        seqs = _kernels.NUMPY_KERNELS["device_seqnums"](starts, increments, 4096)
        results = [k["batch_cluster_counts"](seqs, 50) for k in backends.values()]
        assert all(np.array_equal(results[0], r) for r in results)

        for name, kernel_args in [("device_seqnums", (starts, increments, 4096)),
                                  ("batch_cluster_counts", (seqs, 50))]:
            cells = "".join(f"{best_of(k[name], kernel_args, args.repeat) * 1e3:>10.2f}ms"
                            for k in backends.values())
            print(f"{X:>3} {Y:>3} {name:<22}{cells}")

    config = TrialConfig(8, 2, 10_000)
    start = time.perf_counter()
    run_monte_carlo(config)
    print(f"\nrun_monte_carlo X=8 Y=2 N=10000 on {_kernels.BACKEND}: "
          f"{time.perf_counter() - start:.2f}s (dominated by per-trial RNG setup)")


if __name__ == "__main__":
    main()
