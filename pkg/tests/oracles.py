"""Independent reference implementations used to check the package.

Everything here is deliberately naive and written from the operation
definitions alone: exact rational arithmetic for the region geometry,
plain Python loops for pooling, straight-line matrix-vector code for
whitening, linear scans for quantization and a full sort for search.
None of it shares code with the package's fast paths.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


def enumerate_regions(width: int, height: int, scales: int) -> list[tuple[int, int, int, int]]:
    """(x, y, side, scale) tuples via exact Fraction arithmetic.

    Window side at scale s is 2*min(W,H)/(s+1); the emitted integer side
    is its floor clamped to >= 1; the per-axis window count comes from the
    exact side and a stride of 60% of it; origins are evenly spaced over
    [0, extent - side] and rounded half-up.
    """
    m = min(width, height)
    out = []
    for s in range(1, scales + 1):
        exact_side = Fraction(2 * m, s + 1)
        side = max(1, math.floor(exact_side))
        xs = _axis(width, exact_side, side)
        ys = _axis(height, exact_side, side)
        for y in ys:
            for x in xs:
                out.append((x, y, side, s))
    return out


def _axis(extent: int, exact_side: Fraction, side: int) -> list[int]:
    count = math.ceil((extent - exact_side) / (Fraction(6, 10) * exact_side)) + 1
    span = extent - side
    if count == 1 or span == 0:
        return [0]
    origins = []
    for i in range(count):
        position = Fraction(i * span, count - 1)
        rounded = math.floor(position + Fraction(1, 2))
        if not origins or origins[-1] != rounded:
            origins.append(rounded)
    return origins


def pool_loops(tensor: np.ndarray, mode: str) -> np.ndarray:
    """Triple-loop max / sum pooling; smac halves normalized separately."""
    channels, h, w = tensor.shape
    macs = np.empty(channels, dtype=np.float64)
    sums = np.empty(channels, dtype=np.float64)
    for c in range(channels):
        best = -math.inf
        acc = 0.0
        for y in range(h):
            for x in range(w):
                v = float(tensor[c, y, x])
                if v > best:
                    best = v
                acc += v
        macs[c] = best
        sums[c] = acc
    if mode == "mac":
        return macs.astype(np.float32)
    if mode == "sum":
        return sums.astype(np.float32)
    return np.concatenate([unit(macs), unit(sums)]).astype(np.float32)


def unit(v: np.ndarray) -> np.ndarray:
    norm = math.sqrt(float(np.dot(v.astype(np.float64), v.astype(np.float64))))
    if norm == 0.0:
        return np.asarray(v, dtype=np.float64)
    return np.asarray(v, dtype=np.float64) / norm


def whiten_naive(mean: np.ndarray, basis: np.ndarray, v: np.ndarray) -> np.ndarray:
    """unit(basis @ (unit(v) - mean)) with explicit loops."""
    x = unit(np.asarray(v, dtype=np.float64)) - np.asarray(mean, dtype=np.float64)
    d, dim = basis.shape
    y = np.zeros(d, dtype=np.float64)
    for i in range(d):
        acc = 0.0
        for j in range(dim):
            acc += float(basis[i, j]) * x[j]
        y[i] = acc
    return unit(y).astype(np.float32)


def quantize_scan(centroids: np.ndarray, v: np.ndarray) -> int:
    """Linear scan over centroids; ties go to the lowest index."""
    best = math.inf
    best_i = 0
    v64 = np.asarray(v, dtype=np.float64)
    for i in range(centroids.shape[0]):
        diff = v64 - centroids[i].astype(np.float64)
        d2 = float(np.dot(diff, diff))
        if d2 < best:
            best = d2
            best_i = i
    return best_i


def topk_full_sort(ids, vectors: np.ndarray, query: np.ndarray, k: int):
    """Every (distance, id) pair, fully sorted; the first k rows."""
    q = np.asarray(query, dtype=np.float64)
    rows = []
    for ident, vec in zip(ids, vectors):
        diff = vec.astype(np.float64) - q
        rows.append((float(np.sqrt(np.dot(diff, diff))), ident))
    rows.sort(key=lambda r: (r[0], r[1]))
    return rows[:k]


def nar_by_hand(ranks: list[int], n: int) -> float:
    n_rel = len(ranks)
    return (sum(ranks) - n_rel * (n_rel + 1) / 2) / (n * n_rel)


def ap_by_hand(flags: list[bool], n_rel: int, k: int) -> float:
    hits = 0
    total = 0.0
    for i, flag in enumerate(flags[:k]):
        if flag:
            hits += 1
            total += hits / (i + 1)
    return total / min(n_rel, k)
