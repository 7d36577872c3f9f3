"""Unsupervised regional attention: visual-word dictionary + IDF weights.

Whitened regional vectors are clustered into a k-word dictionary
(k-means, k-means++ seeding, Lloyd updates).  Treating each image as a
document and each region's nearest word as a term, a word's document
frequency df is the number of images whose region set contains it, and
its attention weight is

    idf[w] = ln((1 + n_docs) / (1 + df[w]))

which is 0 for a word present in every image and ln(1 + n_docs) for a
word never assigned, never negative.  Term frequency is deliberately not
modeled; summing the weighted regional vectors already accumulates it.

Dictionary file RMDC1, little-endian: magic b"RMDC", version u32, k u32,
d u32, n_docs u64, centroids k*d f32, df k*u64, idf k*f32.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from . import kernels
from .errors import FitError, FormatError

logger = logging.getLogger(__name__)

DICTIONARY_MAGIC = b"RMDC"
DICTIONARY_VERSION = 1
DEFAULT_WORDS = 1024
DEFAULT_MAX_ITERS = 50
DEFAULT_REL_TOL = 1e-4


@dataclass(frozen=True)
class AttentionDictionary:
    centroids: np.ndarray  # (k, d) float32
    df: np.ndarray  # (k,) uint64 document frequencies
    n_docs: int

    def __post_init__(self):
        if self.centroids.ndim != 2:
            raise ValueError("centroids must be (k, d)")
        if self.df.shape != (self.centroids.shape[0],):
            raise ValueError("need one df entry per word")
        if not np.isfinite(self.centroids).all():
            raise ValueError("centroids must be finite")

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]

    @property
    def idf(self) -> np.ndarray:
        return compute_idf(self.df, self.n_docs)


def compute_idf(df: np.ndarray, n_docs: int) -> np.ndarray:
    """ln((1 + n_docs) / (1 + df)) as float32, elementwise non-negative."""
    if n_docs < 1:
        raise FitError("document frequencies need a non-empty gallery")
    return np.log((1.0 + n_docs) / (1.0 + np.asarray(df, dtype=np.float64))).astype(np.float32)


@dataclass(frozen=True)
class KMeansFit:
    centroids: np.ndarray  # (k, d) float32
    inertia_history: tuple[float, ...]
    iterations: int


def fit_dictionary(
    samples: np.ndarray,
    k: int = DEFAULT_WORDS,
    seed: int = 0,
    max_iters: int = DEFAULT_MAX_ITERS,
    rel_tol: float = DEFAULT_REL_TOL,
) -> KMeansFit:
    """Cluster (n, d) sample vectors into k centroids.

    k-means++ seeding from a generator seeded with ``seed``, then Lloyd
    iterations until ``max_iters`` or the relative inertia improvement
    drops below ``rel_tol``.  Empty clusters are re-seeded to the points
    currently farthest from their centroid.  Deterministic: the same
    (samples, seed) always yields bit-identical centroids.
    """
    samples = np.ascontiguousarray(samples, dtype=np.float32)
    n = samples.shape[0]
    if samples.ndim != 2 or n == 0:
        raise FitError(f"samples must be a non-empty (n, d) array, got {samples.shape}")
    if n < k:
        raise FitError(f"cannot fit {k} words from {n} samples")
    centroids = _plus_plus_seed(samples, k, np.random.default_rng(seed))
    history: list[float] = []
    assign = None
    for iteration in range(max_iters):
        assign, d2 = kernels.nearest_centroids(samples, centroids)
        inertia = float(d2.sum())
        if history and not inertia <= history[-1] * (1.0 + 1e-9) + 1e-12:
            raise AssertionError(
                f"Lloyd iteration {iteration} increased inertia: {history[-1]} -> {inertia}"
            )
        history.append(inertia)
        if len(history) >= 2:
            prev = history[-2]
            if prev == 0.0 or (prev - inertia) / prev < rel_tol:
                break
        sums, counts = kernels.cluster_sums(samples, assign, k)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            # farthest points first; ties go to the lowest sample index
            farthest = np.argsort(-d2, kind="stable")[: empty.size]
            for slot, point in zip(empty, farthest):
                sums[slot] = samples[point].astype(np.float64)
                counts[slot] = 1
        centroids = sums / counts[:, None]
    return KMeansFit(
        centroids=centroids.astype(np.float32),
        inertia_history=tuple(history),
        iterations=len(history),
    )


def _plus_plus_seed(samples: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = samples.shape[0]
    chosen = np.empty((k, samples.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    chosen[0] = samples[first]
    d2 = kernels.sqdist(chosen[0:1], samples)[0]
    for j in range(1, k):
        total = d2.sum()
        if total > 0.0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        chosen[j] = samples[idx]
        d2 = np.minimum(d2, kernels.sqdist(chosen[j : j + 1], samples)[0])
    return chosen


def quantize(dictionary: AttentionDictionary, v: np.ndarray) -> int:
    """Nearest word id for one vector; ties break to the lowest id."""
    return int(quantize_batch(dictionary, np.asarray(v)[None, :])[0])


def quantize_batch(dictionary: AttentionDictionary, rows: np.ndarray) -> np.ndarray:
    rows = np.asarray(rows)
    if rows.ndim != 2 or rows.shape[1] != dictionary.dim:
        raise ValueError(f"expected (n, {dictionary.dim}) rows, got {rows.shape}")
    idx, _ = kernels.nearest_centroids(rows.astype(np.float32, copy=False), dictionary.centroids)
    return idx


def attend(dictionary: AttentionDictionary, v: np.ndarray) -> float:
    """IDF weight of the word ``v`` quantizes to."""
    return float(dictionary.idf[quantize(dictionary, v)])


def attend_batch(dictionary: AttentionDictionary, rows: np.ndarray) -> np.ndarray:
    return dictionary.idf[quantize_batch(dictionary, rows)]


def document_frequencies(
    centroids: np.ndarray, documents: Iterable[np.ndarray]
) -> tuple[np.ndarray, int]:
    """Stream per-image regional-vector groups and count word membership.

    Each element of ``documents`` is one image's (r, d) whitened regional
    vectors; df[w] counts the images whose region set contains word w.
    """
    k = centroids.shape[0]
    df = np.zeros(k, dtype=np.uint64)
    n_docs = 0
    for rows in documents:
        rows = np.asarray(rows)
        if rows.size == 0:
            n_docs += 1
            continue
        idx, _ = kernels.nearest_centroids(rows.astype(np.float32, copy=False), centroids)
        df[np.unique(idx)] += 1
        n_docs += 1
    if n_docs == 0:
        raise FitError("document frequencies need a non-empty gallery")
    return df, n_docs


def build_dictionary(
    centroids: np.ndarray, documents: Iterable[np.ndarray]
) -> AttentionDictionary:
    df, n_docs = document_frequencies(centroids, documents)
    return AttentionDictionary(
        centroids=np.ascontiguousarray(centroids, dtype=np.float32), df=df, n_docs=n_docs
    )


def write_dictionary(path: str | Path, dictionary: AttentionDictionary) -> None:
    with open(path, "wb") as f:
        f.write(DICTIONARY_MAGIC)
        f.write(struct.pack("<III", DICTIONARY_VERSION, dictionary.k, dictionary.dim))
        f.write(struct.pack("<Q", dictionary.n_docs))
        f.write(dictionary.centroids.astype("<f4").tobytes())
        f.write(dictionary.df.astype("<u8").tobytes())
        f.write(dictionary.idf.astype("<f4").tobytes())


def read_dictionary(path: str | Path) -> AttentionDictionary:
    raw = Path(path).read_bytes()
    if len(raw) < 4 or raw[:4] != DICTIONARY_MAGIC:
        raise FormatError(f"{path}: bad magic at byte 0, expected {DICTIONARY_MAGIC!r}")
    if len(raw) < 24:
        raise FormatError(f"{path}: header truncated at byte {len(raw)}")
    version, k, dim = struct.unpack_from("<III", raw, 4)
    if version != DICTIONARY_VERSION:
        raise FormatError(f"{path}: unsupported version {version} at byte 4")
    (n_docs,) = struct.unpack_from("<Q", raw, 16)
    expected = 24 + 4 * k * dim + 8 * k + 4 * k
    if len(raw) != expected:
        raise FormatError(f"{path}: truncated at byte {len(raw)}, expected {expected} bytes")
    off = 24
    centroids = np.frombuffer(raw, "<f4", k * dim, off).reshape(k, dim).copy()
    off += 4 * k * dim
    df = np.frombuffer(raw, "<u8", k, off).copy()
    off += 8 * k
    stored_idf = np.frombuffer(raw, "<f4", k, off)
    dictionary = AttentionDictionary(centroids=centroids, df=df, n_docs=int(n_docs))
    if not np.array_equal(stored_idf, dictionary.idf):
        raise FormatError(f"{path}: stored idf table disagrees with df counts at byte {off}")
    return dictionary
