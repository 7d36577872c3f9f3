"""Benchmark every kernel's numba lane against its numpy lane.

Run: python bench/bench_kernels.py [--channels 1024] [--repeats 20]

Shapes mirror the production hot paths: region pooling over a 20x20
stride-16 map, nearest-centroid assignment against a 1,024-word
dictionary, blocked query-gallery distances, and the Lloyd scatter-add.
The default dispatch profile (see rmfeat.kernels) follows what this
benchmark shows: numba wins the loop-shaped kernels, BLAS the
matmul-shaped ones.
"""

import argparse
import time

import numpy as np

from rmfeat import kernels
from rmfeat.regions import region_matrix


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def report(name, numpy_fn, numba_fn, repeats):
    t_np = timeit(numpy_fn, repeats)
    if numba_fn is None:
        print(f"{name:<22} numpy {1e3 * t_np:8.2f} ms   numba unavailable")
        return
    numba_fn()  # compile outside the timed region
    t_nb = timeit(numba_fn, repeats)
    ratio = t_np / t_nb if t_nb > 0 else float("inf")
    winner = "numba" if t_nb < t_np else "numpy"
    print(
        f"{name:<22} numpy {1e3 * t_np:8.2f} ms   numba {1e3 * t_nb:8.2f} ms   "
        f"numpy/numba {ratio:5.2f}x   -> {winner}"
    )


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--channels", type=int, default=1024)
    parser.add_argument("--repeats", type=int, default=20)
    parser.add_argument("--words", type=int, default=1024)
    parser.add_argument("--dim", type=int, default=256)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    print(f"lanes active by default: {kernels.active_lanes()}")

    data = rng.standard_normal((args.channels, 20, 20)).astype(np.float32)
    regions = np.ascontiguousarray(region_matrix(20, 20, 4))
    report(
        "pool_regions",
        lambda: kernels.pool_regions_numpy(data, regions),
        (lambda: kernels.pool_regions_numba(data, regions)) if kernels.HAS_NUMBA else None,
        args.repeats,
    )

    points = rng.standard_normal((20_000, args.dim)).astype(np.float32)
    centroids = rng.standard_normal((args.words, args.dim))
    report(
        "nearest_centroids",
        lambda: kernels.nearest_centroids_numpy(points, centroids),
        (lambda: kernels.nearest_centroids_numba(points, centroids)) if kernels.HAS_NUMBA else None,
        max(1, args.repeats // 4),
    )

    queries = rng.standard_normal((100, args.dim))
    block = rng.standard_normal((65_536, args.dim)).astype(np.float32)
    report(
        "sqdist",
        lambda: kernels.sqdist_numpy(queries, block),
        (lambda: kernels.sqdist_numba(queries, block)) if kernels.HAS_NUMBA else None,
        max(1, args.repeats // 4),
    )

    assign = rng.integers(0, args.words, size=points.shape[0]).astype(np.int64)
    report(
        "cluster_sums",
        lambda: kernels.cluster_sums_numpy(points, assign, args.words),
        (lambda: kernels.cluster_sums_numba(points, assign, args.words)) if kernels.HAS_NUMBA else None,
        max(1, args.repeats // 2),
    )


if __name__ == "__main__":
    main()
