from __future__ import annotations

import logging
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..lib.costants import ZERO_NORM
from .Models import DimensionMismatch


def _normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    norm = np.linalg.norm(q)
    if norm < ZERO_NORM:
        return np.zeros_like(q)

    return q / norm


def _rank_scores(scores: np.ndarray, k: int) -> np.ndarray:
    """
    Indices of the k best finite scores, score descending then index ascending.
    Excluded rows are expected to carry -inf.
    """
    valid = np.flatnonzero(np.isfinite(scores))
    if not len(valid):
        return valid

    k = min(k, len(valid))
    vals = scores[valid]

    if k < len(valid):
        # everything tied with the k-th best stays in the pool so the tie-break is exact
        kth = np.partition(vals, len(vals) - k)[len(vals) - k]
        pool = valid[vals >= kth]
    else:
        pool = valid

    order = np.lexsort((pool, -scores[pool]))
    return pool[order[:k]]


class EmbeddingIndex():
    """Unit-normalized rows for exact cosine search. Zero rows score 0 against everything."""

    def __init__(self, vectors: np.ndarray):
        vectors = np.asarray(vectors, dtype=np.float64)

        if vectors.ndim != 2:
            raise DimensionMismatch(f'Index expects a rows x dim matrix, got shape {vectors.shape}')
        if vectors.shape[0] < 1:
            raise DimensionMismatch('Index needs at least one row')

        norms = np.linalg.norm(vectors, axis=1)
        zero = norms < ZERO_NORM
        safe = np.where(zero, 1.0, norms)

        normalized = vectors / safe[:, None]
        normalized[zero] = 0.0
        normalized.setflags(write=False)

        self._vectors = normalized
        self.zero_mask = frozenset(np.flatnonzero(zero).tolist())

        logging.debug(f'Built index with {self.rows} rows, dim={self.dim}, {len(self.zero_mask)} zero rows')

    @property
    def vectors(self) -> np.ndarray:
        return self._vectors

    @property
    def rows(self) -> int:
        return self._vectors.shape[0]

    @property
    def dim(self) -> int:
        return self._vectors.shape[1]

    def _check_query(self, q: np.ndarray):
        if q.shape[-1] != self.dim:
            raise DimensionMismatch(f'Query has dim {q.shape[-1]}, index has {self.dim}')

    def scores(self, query: np.ndarray) -> np.ndarray:
        """Cosine of the query against every row"""
        q = np.asarray(query, dtype=np.float64)
        self._check_query(q)
        return self._vectors @ _normalize(q)

    def scores_batch(self, queries: np.ndarray) -> np.ndarray:
        q = np.asarray(queries, dtype=np.float64)
        self._check_query(q)
        norms = np.linalg.norm(q, axis=1)
        zero = norms < ZERO_NORM
        qn = q / np.where(zero, 1.0, norms)[:, None]
        qn[zero] = 0.0
        return qn @ self._vectors.T

    def topk(self, query: np.ndarray, k: int, exclude: Optional[Iterable[int]] = None) -> List[Tuple[int, float]]:
        if k < 1:
            raise ValueError('k must be >= 1')

        scores = self.scores(query)
        return self._select(scores, k, exclude)

    def topk_batch(self, queries: np.ndarray, k: int,
                   excludes: Optional[Sequence[Optional[Iterable[int]]]] = None) -> List[List[Tuple[int, float]]]:
        """One blocked matrix product for all queries, then per-query selection"""
        if k < 1:
            raise ValueError('k must be >= 1')

        scores = self.scores_batch(queries)
        out = []
        for r in range(scores.shape[0]):
            exclude = excludes[r] if excludes is not None else None
            out.append(self._select(scores[r], k, exclude))

        return out

    def _select(self, scores: np.ndarray, k: int, exclude: Optional[Iterable[int]]) -> List[Tuple[int, float]]:
        scores = np.array(scores, dtype=np.float64)

        if exclude is not None:
            ex = np.fromiter((e for e in exclude if 0 <= e < self.rows), dtype=np.int64)
            scores[ex] = -np.inf

        rows = _rank_scores(scores, k)
        return [(int(r), float(scores[r])) for r in rows]


def build_index(vectors: np.ndarray) -> EmbeddingIndex:
    return EmbeddingIndex(vectors)


def topk(index: EmbeddingIndex, query: np.ndarray, k: int, exclude: Optional[Iterable[int]] = None) -> List[Tuple[int, float]]:
    return index.topk(query, k, exclude)


def dump_topk(path: str, results: Sequence[Tuple[int, List[Tuple[int, float]]]]):
    """Writes `query_id rank row score` rows, rank starting at 1"""
    with open(path, 'w', encoding='utf-8') as f:
        for query_id, ranked in results:
            for rank, (row, score) in enumerate(ranked, start=1):
                f.write(f'{query_id}\t{rank}\t{row}\t{score:.12g}\n')

    logging.info(f'Wrote top-k lists to {path}')
