"""Exact brute-force cosine retrieval with bounded min-heap top-k selection.

Embeddings are unit-normalized once at build time so each query is a single
matrix-vector product; the top-k pass then scans the similarity array with a
size-k min priority queue (push while below capacity, otherwise evict the
minimum when a strictly larger similarity arrives). Results are sorted by
descending similarity with ties broken by earlier catalog position, which
makes the output identical to a full sort under that ordering.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .catalog import Catalog, CourseRecord, LevelFilter, as_embedding
from .errors import DimensionMismatchError, MissingEmbeddingError, ZeroVectorError

NORM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class ScoredCourse:
    """A retrieved course with its cosine similarity and 1-based rank."""

    course: CourseRecord
    similarity: float
    rank: int

    @property
    def course_id(self) -> str:
        return self.course.course_id


@dataclass(frozen=True)
class SimilarityIndex:
    """Immutable search structure over an embedded catalog.

    ``matrix`` holds one unit row per course, in catalog order; ``levels``
    mirrors the course levels for fast filtering.
    """

    courses: tuple[CourseRecord, ...]
    matrix: np.ndarray
    levels: np.ndarray
    dimension: int

    def __len__(self) -> int:
        return len(self.courses)


def build_index(catalog: Catalog) -> SimilarityIndex:
    """Copy and L2-normalize all catalog embeddings; the catalog is untouched."""
    if len(catalog) == 0:
        return SimilarityIndex(courses=(), matrix=np.zeros((0, catalog.dimension or 0)), levels=np.zeros(0, dtype=np.int64), dimension=catalog.dimension or 0)
    for c in catalog:
        if c.embedding is None:
            raise MissingEmbeddingError(c.course_id)
    matrix = np.stack([c.embedding for c in catalog]).astype(np.float64, copy=True)
    norms = np.linalg.norm(matrix, axis=1)
    if np.any(norms == 0.0):
        bad = catalog.courses[int(np.argmin(norms))].course_id
        raise ZeroVectorError(f"course {bad!r} has a zero embedding")
    matrix /= norms[:, None]
    levels = np.asarray([c.level for c in catalog], dtype=np.int64)
    return SimilarityIndex(
        courses=catalog.courses,
        matrix=matrix,
        levels=levels,
        dimension=int(matrix.shape[1]),
    )


def cosine_similarity(a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray) -> float:
    """dot(a, b) / (||a|| ||b||), clamped to [-1, 1] to absorb rounding."""
    va = as_embedding(a)
    vb = as_embedding(b)
    if va.shape[0] != vb.shape[0]:
        raise DimensionMismatchError(va.shape[0], vb.shape[0])
    sim = float(np.dot(va, vb) / (np.linalg.norm(va) * np.linalg.norm(vb)))
    return max(-1.0, min(1.0, sim))


def top_k(
    index: SimilarityIndex,
    query: Sequence[float] | np.ndarray,
    k: int,
    level_filter: LevelFilter | None = None,
) -> list[ScoredCourse]:
    """The k most similar courses passing the level filter, most similar first.

    Returns fewer than k entries when the filtered corpus is smaller, and an
    empty list when the filter removes everything (not an error). Equal
    similarities resolve to the earlier catalog position.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    q = as_embedding(query)
    if len(index) == 0:
        return []
    if q.shape[0] != index.dimension:
        raise DimensionMismatchError(index.dimension, q.shape[0], where="query")
    q = q / np.linalg.norm(q)

    sims = index.matrix @ q
    np.clip(sims, -1.0, 1.0, out=sims)

    if level_filter is None:
        level_filter = LevelFilter.all_levels()
    if level_filter.lo is None and level_filter.hi is None:
        positions = None
        cand_sims = sims
    else:
        mask = np.ones(len(index), dtype=bool)
        if level_filter.lo is not None:
            mask &= index.levels >= level_filter.lo
        if level_filter.hi is not None:
            mask &= index.levels <= level_filter.hi
        positions = np.nonzero(mask)[0]
        cand_sims = sims[positions]

    n_candidates = len(cand_sims)
    if n_candidates == 0:
        return []

    if k >= n_candidates:
        # Saturated queue: every candidate is admitted and nothing is ever
        # evicted, so selection reduces to the output sort.
        keys = np.arange(n_candidates) if positions is None else positions
        order = np.lexsort((keys, -cand_sims))
        ordered = [(float(cand_sims[j]), int(keys[j])) for j in order]
    else:
        # Size-k min-heap over one scan. Entries are (sim, -idx) so that among
        # equal similarities the latest catalog position is evicted first,
        # keeping the earliest positions: the same tie-break as the output sort.
        if positions is None:
            candidates = enumerate(cand_sims.tolist())
        else:
            candidates = zip(positions.tolist(), cand_sims.tolist())
        heap: list[tuple[float, int]] = []
        push = heapq.heappush
        replace = heapq.heapreplace
        for idx, sim in candidates:
            if len(heap) < k:
                push(heap, (sim, -idx))
            elif sim > heap[0][0]:
                replace(heap, (sim, -idx))
        ordered = sorted(((sim, -neg) for sim, neg in heap), key=lambda t: (-t[0], t[1]))

    return [
        ScoredCourse(course=index.courses[idx], similarity=sim, rank=rank)
        for rank, (sim, idx) in enumerate(ordered, start=1)
    ]
