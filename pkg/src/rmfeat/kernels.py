"""Hot numeric kernels, each with a numba lane and a pure-numpy lane.

The lane is picked once at import time from the ``RMF_KERNELS`` environment
variable:

* ``numba``  - every kernel uses its ``@njit`` implementation
* ``numpy``  - every kernel uses its vectorized numpy implementation
* ``auto``   - (default) numba for the loop-shaped kernels (region pooling,
  cluster-sum accumulation), numpy/BLAS for the matmul-shaped ones
  (pairwise distances).  ``bench/bench_kernels.py`` measures both lanes;
  on typical boxes BLAS wins wherever the work is a large matrix product.

All kernels take float32 data and accumulate in float64.  The numba lanes
are compiled serially (no ``parallel=True``): callers parallelize across
images or blocks with thread pools, and concurrent entry into numba
parallel regions is not safe on the default threading layer.  Within one
lane every kernel is bit-deterministic for fixed inputs.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


# ---------------------------------------------------------------------------
# region pooling: (C, H, W) map + (R, 3) [x, y, side] -> per-region max / sum


def _pool_regions_loops(data, regions):
    R = regions.shape[0]
    C = data.shape[0]
    macs = np.empty((R, C), dtype=np.float32)
    sums = np.empty((R, C), dtype=np.float32)
    for r in range(R):
        x0 = regions[r, 0]
        y0 = regions[r, 1]
        side = regions[r, 2]
        for c in range(C):
            m = data[c, y0, x0]
            acc = 0.0
            for y in range(y0, y0 + side):
                for x in range(x0, x0 + side):
                    v = data[c, y, x]
                    if v > m:
                        m = v
                    acc += v
            macs[r, c] = m
            sums[r, c] = acc
    return macs, sums


def pool_regions_numpy(data: np.ndarray, regions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel spatial max and sum over each square window."""
    R = regions.shape[0]
    C = data.shape[0]
    macs = np.empty((R, C), dtype=np.float32)
    sums = np.empty((R, C), dtype=np.float32)
    for r in range(R):
        x0, y0, side = int(regions[r, 0]), int(regions[r, 1]), int(regions[r, 2])
        win = data[:, y0 : y0 + side, x0 : x0 + side]
        macs[r] = win.max(axis=(1, 2))
        sums[r] = win.sum(axis=(1, 2), dtype=np.float64)
    return macs, sums


pool_regions_numba = njit(cache=True)(_pool_regions_loops) if HAS_NUMBA else None


# ---------------------------------------------------------------------------
# nearest centroid: (n, d) points vs (k, d) centroids -> argmin index + d^2


def _nearest_centroids_loops(points, centroids):
    n = points.shape[0]
    k = centroids.shape[0]
    d = points.shape[1]
    idx = np.empty(n, dtype=np.int64)
    best = np.empty(n, dtype=np.float64)
    for i in range(n):
        bi = 0
        bd = np.inf
        for j in range(k):
            acc = 0.0
            for c in range(d):
                diff = np.float64(points[i, c]) - np.float64(centroids[j, c])
                acc += diff * diff
            if acc < bd:
                bd = acc
                bi = j
        idx[i] = bi
        best[i] = bd
    return idx, best


def nearest_centroids_numpy(
    points: np.ndarray, centroids: np.ndarray, block: int = 4096
) -> tuple[np.ndarray, np.ndarray]:
    """Exact nearest centroid per point (squared Euclidean, float64).

    Ties resolve to the lowest centroid index.  Blocked so the (n, k)
    distance matrix never exceeds ``block * k`` floats.
    """
    pts = np.asarray(points)
    cen = np.asarray(centroids, dtype=np.float64)
    n = pts.shape[0]
    idx = np.empty(n, dtype=np.int64)
    best = np.empty(n, dtype=np.float64)
    c_sq = np.einsum("ij,ij->i", cen, cen)
    for start in range(0, n, block):
        blk = pts[start : start + block].astype(np.float64)
        d2 = np.einsum("ij,ij->i", blk, blk)[:, None] - 2.0 * (blk @ cen.T) + c_sq[None, :]
        sub = np.argmin(d2, axis=1)
        idx[start : start + block] = sub
        best[start : start + block] = np.take_along_axis(d2, sub[:, None], axis=1)[:, 0]
    np.maximum(best, 0.0, out=best)
    return idx, best


nearest_centroids_numba = njit(cache=True)(_nearest_centroids_loops) if HAS_NUMBA else None


# ---------------------------------------------------------------------------
# pairwise squared distances: (q, d) queries vs (m, d) gallery block


def _sqdist_loops(queries, block):
    q = queries.shape[0]
    m = block.shape[0]
    d = queries.shape[1]
    out = np.empty((q, m), dtype=np.float64)
    for i in range(q):
        for j in range(m):
            acc = 0.0
            for c in range(d):
                diff = np.float64(queries[i, c]) - np.float64(block[j, c])
                acc += diff * diff
            out[i, j] = acc
    return out


def sqdist_numpy(queries: np.ndarray, block: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, queries x block, float64."""
    q64 = np.asarray(queries, dtype=np.float64)
    b64 = np.asarray(block, dtype=np.float64)
    q_sq = np.einsum("ij,ij->i", q64, q64)
    b_sq = np.einsum("ij,ij->i", b64, b64)
    out = q_sq[:, None] - 2.0 * (q64 @ b64.T) + b_sq[None, :]
    np.maximum(out, 0.0, out=out)
    return out


sqdist_numba = njit(cache=True)(_sqdist_loops) if HAS_NUMBA else None


# ---------------------------------------------------------------------------
# cluster sums: scatter-add points into their assigned centroid row


def _cluster_sums_loops(points, assign, k):
    n = points.shape[0]
    d = points.shape[1]
    sums = np.zeros((k, d), dtype=np.float64)
    counts = np.zeros(k, dtype=np.int64)
    for i in range(n):
        j = assign[i]
        counts[j] += 1
        for c in range(d):
            sums[j, c] += np.float64(points[i, c])
    return sums, counts


def cluster_sums_numpy(points: np.ndarray, assign: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    pts = np.asarray(points, dtype=np.float64)
    counts = np.bincount(assign, minlength=k).astype(np.int64)
    sums = np.zeros((k, pts.shape[1]), dtype=np.float64)
    np.add.at(sums, assign, pts)
    return sums, counts


cluster_sums_numba = njit(cache=True)(_cluster_sums_loops) if HAS_NUMBA else None


# ---------------------------------------------------------------------------
# lane selection

_LOOP_KERNELS = ("pool_regions", "cluster_sums")
_MATMUL_KERNELS = ("nearest_centroids", "sqdist")


def _resolve_backend() -> dict[str, str]:
    choice = os.environ.get("RMF_KERNELS", "auto").strip().lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(f"RMF_KERNELS must be auto, numba or numpy, got {choice!r}")
    if choice == "numba" and not HAS_NUMBA:
        raise ImportError("RMF_KERNELS=numba but numba is not importable")
    lanes = {}
    for name in _LOOP_KERNELS + _MATMUL_KERNELS:
        if choice == "numpy" or not HAS_NUMBA:
            lanes[name] = "numpy"
        elif choice == "numba":
            lanes[name] = "numba"
        else:
            lanes[name] = "numba" if name in _LOOP_KERNELS else "numpy"
    return lanes


_LANES = _resolve_backend()
_IMPLS = {
    ("pool_regions", "numpy"): pool_regions_numpy,
    ("pool_regions", "numba"): pool_regions_numba,
    ("nearest_centroids", "numpy"): nearest_centroids_numpy,
    ("nearest_centroids", "numba"): nearest_centroids_numba,
    ("sqdist", "numpy"): sqdist_numpy,
    ("sqdist", "numba"): sqdist_numba,
    ("cluster_sums", "numpy"): cluster_sums_numpy,
    ("cluster_sums", "numba"): cluster_sums_numba,
}


def active_lanes() -> dict[str, str]:
    """Which lane each kernel dispatches to, for config snapshots and logs."""
    return dict(_LANES)


def pool_regions(data: np.ndarray, regions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return _IMPLS[("pool_regions", _LANES["pool_regions"])](data, regions)


def nearest_centroids(points: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if _LANES["nearest_centroids"] == "numba":
        return nearest_centroids_numba(
            np.ascontiguousarray(points), np.ascontiguousarray(centroids)
        )
    return nearest_centroids_numpy(points, centroids)


def sqdist(queries: np.ndarray, block: np.ndarray) -> np.ndarray:
    if _LANES["sqdist"] == "numba":
        return sqdist_numba(np.ascontiguousarray(queries), np.ascontiguousarray(block))
    return sqdist_numpy(queries, block)


def cluster_sums(points: np.ndarray, assign: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    if _LANES["cluster_sums"] == "numba":
        return cluster_sums_numba(
            np.ascontiguousarray(points), np.ascontiguousarray(assign), k
        )
    return cluster_sums_numpy(points, assign, k)
