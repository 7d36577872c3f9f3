"""Exact nearest-neighbor retrieval over descriptor files plus the two
ranking-quality metrics used for reporting.

Search is an exhaustive blocked scan: squared Euclidean distances are
computed block by block (float64), and a running candidate set of size K
is merged after each block.  Ties at any cut are broken by ascending
gallery id, so results are identical to a full sort with key
(distance, id) regardless of block size.

Metrics, with 1-based ranks R_i of the N_R relevant items:

* normalized average rank over a full-gallery ranking of n items:
  ``(sum(R_i) - N_R * (N_R + 1) / 2) / (n * N_R)``, 0 when every
  relevant item is ranked first.
* average precision truncated at K:
  ``sum(precision@r for hits at r <= K) / min(N_R, K)``; mean over
  queries gives MAP@K.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .errors import EvaluationError, FormatError
from .tensorio import read_descriptors

logger = logging.getLogger(__name__)

DEFAULT_TOP_K = 100
_SEARCH_BLOCK = 65536


@dataclass
class DescriptorIndex:
    """Immutable in-memory gallery: ids plus a contiguous float32 block."""

    ids: list[str]
    vectors: np.ndarray  # (n, dim) float32
    id_rank: np.ndarray  # (n,) int64, rank of each row in ascending-id order

    _row_by_id: dict[str, int] | None = None

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def row(self, image_id: str) -> int:
        if self._row_by_id is None:
            self._row_by_id = {ident: i for i, ident in enumerate(self.ids)}
        try:
            return self._row_by_id[image_id]
        except KeyError:
            raise KeyError(f"id {image_id!r} not in index") from None

    def vector(self, image_id: str) -> np.ndarray:
        return self.vectors[self.row(image_id)]

    def __contains__(self, image_id: str) -> bool:
        if self._row_by_id is None:
            self._row_by_id = {ident: i for i, ident in enumerate(self.ids)}
        return image_id in self._row_by_id


def index_from_arrays(ids: Sequence[str], vectors: np.ndarray) -> DescriptorIndex:
    vectors = np.ascontiguousarray(vectors, dtype=np.float32)
    if vectors.ndim != 2 or vectors.shape[0] != len(ids):
        raise ValueError("vectors must be (n, dim) parallel to ids")
    ids = list(ids)
    if len(set(ids)) != len(ids):
        raise FormatError("duplicate ids in descriptor set")
    order = np.argsort(np.array(ids, dtype=object), kind="stable")
    id_rank = np.empty(len(ids), dtype=np.int64)
    id_rank[order] = np.arange(len(ids))
    return DescriptorIndex(ids=ids, vectors=vectors, id_rank=id_rank)


def build_index(path: str | Path) -> DescriptorIndex:
    """Load an RMDS1 file into a searchable index; duplicate ids error."""
    ids, vectors = read_descriptors(path)
    return index_from_arrays(ids, vectors)


@dataclass(frozen=True)
class RankingResult:
    query_id: str
    ids: list[str]
    distances: np.ndarray  # (len(ids),) float64, non-decreasing


def _select_k(
    d2: np.ndarray, rows: np.ndarray, rank: np.ndarray, k: int
) -> tuple[np.ndarray, np.ndarray]:
    """Pick the k candidates smallest by (distance, id rank), exactly."""
    m = d2.shape[0]
    if m <= k:
        order = np.lexsort((rank, d2))
        return d2[order], rows[order]
    part = np.argpartition(d2, k - 1)[:k]
    cutoff = d2[part].max()
    below = np.flatnonzero(d2 < cutoff)
    tied = np.flatnonzero(d2 == cutoff)
    need = k - below.size
    if tied.size > need:
        keep = np.argpartition(rank[tied], need - 1)[:need]
        tied = tied[keep]
    sel = np.concatenate([below, tied])
    order = np.lexsort((rank[sel], d2[sel]))
    sel = sel[order]
    return d2[sel], rows[sel]


def search_batch(
    index: DescriptorIndex,
    queries: np.ndarray,
    k: int,
    query_ids: Sequence[str] | None = None,
    exclude_self: bool = False,
) -> list[RankingResult]:
    """Exact top-k by Euclidean distance for an (m, dim) query block.

    With ``exclude_self``, a query whose id exists in the gallery never
    retrieves its own gallery row.
    """
    queries = np.asarray(queries, dtype=np.float64)
    if queries.ndim != 2 or queries.shape[1] != index.dim:
        raise ValueError(f"queries must be (m, {index.dim}), got {queries.shape}")
    m = queries.shape[0]
    if query_ids is None:
        query_ids = [f"q{i}" for i in range(m)]
    if k < 1:
        raise ValueError("k must be >= 1")
    self_rows = np.full(m, -1, dtype=np.int64)
    if exclude_self:
        for i, qid in enumerate(query_ids):
            if qid in index:
                self_rows[i] = index.row(qid)
    fetch = min(k + 1, index.size) if exclude_self else min(k, index.size)

    best_d = [np.empty(0, dtype=np.float64) for _ in range(m)]
    best_r = [np.empty(0, dtype=np.int64) for _ in range(m)]
    for start in range(0, index.size, _SEARCH_BLOCK):
        block = index.vectors[start : start + _SEARCH_BLOCK]
        rows = np.arange(start, start + block.shape[0], dtype=np.int64)
        d2 = kernels.sqdist(queries, block)
        for i in range(m):
            cand_d = np.concatenate([best_d[i], d2[i]])
            cand_r = np.concatenate([best_r[i], rows])
            best_d[i], best_r[i] = _select_k(cand_d, cand_r, index.id_rank[cand_r], fetch)
    results = []
    for i in range(m):
        d, r = best_d[i], best_r[i]
        if self_rows[i] >= 0:
            keep = r != self_rows[i]
            d, r = d[keep], r[keep]
        d, r = d[: min(k, d.shape[0])], r[: min(k, r.shape[0])]
        results.append(
            RankingResult(
                query_id=query_ids[i],
                ids=[index.ids[j] for j in r],
                distances=np.sqrt(d),
            )
        )
    return results


def search(index: DescriptorIndex, query: np.ndarray, k: int) -> RankingResult:
    """Top-k gallery entries for one query vector."""
    return search_batch(index, np.asarray(query)[None, :], k)[0]


def nar(ranking: Sequence[str], relevant: set[str], gallery_size: int) -> float:
    """Normalized average rank of ``relevant`` within a full ranking."""
    if not relevant:
        raise EvaluationError("relevant set is empty")
    positions = {ident: i + 1 for i, ident in enumerate(ranking)}
    ranks = []
    for ident in relevant:
        if ident not in positions:
            raise EvaluationError(f"relevant id {ident!r} missing from ranking")
        ranks.append(positions[ident])
    n_rel = len(ranks)
    return (sum(ranks) - n_rel * (n_rel + 1) / 2) / (gallery_size * n_rel)


def average_precision_at_k(ranking: Sequence[str], relevant: set[str], k: int = DEFAULT_TOP_K) -> float:
    """Truncated AP: sum of precision@hit over the top k, / min(N_R, k)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not relevant:
        raise EvaluationError("relevant set is empty")
    hits = 0
    total = 0.0
    for i, ident in enumerate(ranking[:k]):
        if ident in relevant:
            hits += 1
            total += hits / (i + 1)
    return total / min(len(relevant), k)


def map_at_k(
    rankings: Mapping[str, Sequence[str]],
    ground_truth: Mapping[str, set[str]],
    k: int = DEFAULT_TOP_K,
) -> float:
    """Mean truncated AP over queries; empty-relevant queries are skipped."""
    scores = []
    for query_id, ranking in rankings.items():
        relevant = ground_truth.get(query_id)
        if not relevant:
            logger.warning("query %r has no relevant ids, excluded from MAP", query_id)
            continue
        scores.append(average_precision_at_k(ranking, relevant, k))
    if not scores:
        raise EvaluationError("no query had a non-empty relevant set")
    return float(np.mean(scores))


def evaluate(
    index: DescriptorIndex,
    query_ids: Sequence[str],
    queries: np.ndarray,
    ground_truth: Mapping[str, set[str]],
    k: int = DEFAULT_TOP_K,
    exclude_self: bool = True,
) -> tuple[dict[str, float], list[RankingResult]]:
    """Full-gallery rankings per query, mean NAR and MAP@k."""
    results = search_batch(index, queries, index.size, query_ids, exclude_self=exclude_self)
    nars = []
    rankings = {}
    for res in results:
        relevant = ground_truth.get(res.query_id)
        if not relevant:
            logger.warning("query %r has no relevant ids, excluded from NAR", res.query_id)
            continue
        # n is the per-query ranking length: the gallery minus the query's
        # own row when self-matches are excluded.
        nars.append(nar(res.ids, relevant, len(res.ids)))
        rankings[res.query_id] = res.ids
    if not nars:
        raise EvaluationError("no query had a non-empty relevant set")
    metrics = {
        "nar": float(np.mean(nars)),
        f"map@{k}": map_at_k(rankings, ground_truth, k),
        "queries": float(len(nars)),
        "gallery": float(index.size),
    }
    return metrics, results


# ---------------------------------------------------------------------------
# text interchange formats


def read_ground_truth(path: str | Path) -> dict[str, set[str]]:
    """CSV of ``query_id,relevant_id`` pairs, one per line."""
    out: dict[str, set[str]] = {}
    with open(path, newline="", encoding="utf-8") as f:
        for line_no, row in enumerate(csv.reader(f), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise FormatError(f"{path}:{line_no}: expected query_id,relevant_id")
            out.setdefault(row[0].strip(), set()).add(row[1].strip())
    return out


def write_ground_truth(path: str | Path, ground_truth: Mapping[str, Iterable[str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        for query_id in ground_truth:
            for ident in sorted(ground_truth[query_id]):
                writer.writerow([query_id, ident])


def write_rankings(path: str | Path, results: Iterable[RankingResult], top: int | None = None) -> None:
    """TSV: query_id, 1-based rank, gallery_id, distance."""
    with open(path, "w", encoding="utf-8") as f:
        for res in results:
            limit = len(res.ids) if top is None else min(top, len(res.ids))
            for i in range(limit):
                f.write(f"{res.query_id}\t{i + 1}\t{res.ids[i]}\t{float(res.distances[i])!r}\n")


def read_rankings(path: str | Path) -> dict[str, list[tuple[str, float]]]:
    out: dict[str, list[tuple[str, float]]] = {}
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise FormatError(f"{path}:{line_no}: expected 4 tab-separated fields")
            query_id, rank_text, gallery_id, dist_text = parts
            rows = out.setdefault(query_id, [])
            if int(rank_text) != len(rows) + 1:
                raise FormatError(f"{path}:{line_no}: ranks must be consecutive from 1")
            rows.append((gallery_id, float(dist_text)))
    return out


def write_metrics(path: str | Path, metrics: Mapping[str, float]) -> None:
    """Line-oriented ``metric<TAB>value`` report."""
    with open(path, "w", encoding="utf-8") as f:
        for name in sorted(metrics):
            f.write(f"{name}\t{float(metrics[name])!r}\n")


def read_metrics(path: str | Path) -> dict[str, float]:
    out = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            name, value = line.split("\t")
            out[name] = float(value)
    return out
