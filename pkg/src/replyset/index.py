"""Exact top-N retrieval over the candidate pool by bias-adjusted dot product.

Pools stay small enough (tens of thousands of rows) that an exact scan is both
fast and free of approximation error, so no ANN structure is used. Scores are
accumulated in float64; ties always break toward the smaller reply id, which
makes every downstream selection deterministic.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ScoredHit:
    """One retrieved reply; ``score`` includes the LM bias, ``raw_dot`` does not."""

    reply_id: int
    score: float
    raw_dot: float


class RetrievalIndex:
    """Immutable scan index over the reply-side embedding matrix."""

    def __init__(self, matrix: np.ndarray, lm_bias: np.ndarray, beta: float = 0.1):
        matrix = np.asarray(matrix)
        lm_bias = np.asarray(lm_bias, dtype=np.float64)
        if matrix.ndim != 2:
            raise ValueError("matrix must be 2-dimensional")
        if lm_bias.ndim != 1 or lm_bias.shape[0] != matrix.shape[0]:
            raise ValueError("lm_bias length must equal the number of matrix rows")
        if beta < 0:
            raise ValueError("beta must be >= 0")
        self.matrix = matrix
        self.lm_bias = lm_bias
        self.beta = float(beta)
        self._matrix64 = matrix.astype(np.float64)
        self._bias_term = self.beta * lm_bias

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def raw_scores(self, query: np.ndarray) -> np.ndarray:
        """Unbiased dot products of the query against every pool row (float64)."""
        query = np.asarray(query, dtype=np.float64)
        if query.shape != (self.dim,):
            raise ValueError(f"query dim {query.shape} does not match index dim ({self.dim},)")
        return self._matrix64 @ query

    def biased_scores(self, raw: np.ndarray) -> np.ndarray:
        return raw + self._bias_term


def select_top(scores: np.ndarray, n: int) -> np.ndarray:
    """Indices of the ``n`` largest scores, descending, ties toward smaller index.

    Exactly equal to a full sort under the same tie-break; returns all indices
    when ``n`` exceeds the array length.
    """
    r = scores.shape[0]
    if n >= r:
        return np.lexsort((np.arange(r), -scores))
    kth = np.partition(scores, r - n)[r - n]
    above = np.flatnonzero(scores > kth)
    fill = np.flatnonzero(scores == kth)[: n - above.size]
    idx = np.concatenate([above, fill])
    return idx[np.lexsort((idx, -scores[idx]))]


def top_n(index: RetrievalIndex, query: np.ndarray, n: int, use_bias: bool = True) -> list[ScoredHit]:
    """The ``n`` best pool replies for a query.

    Ordering uses the biased score when ``use_bias`` and the raw dot product
    otherwise; the returned hits always carry both values.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    raw = index.raw_scores(query)
    biased = index.biased_scores(raw)
    ids = select_top(biased if use_bias else raw, n)
    return [ScoredHit(int(i), float(biased[i]), float(raw[i])) for i in ids]


def batch_top_n(
    index: RetrievalIndex,
    queries: np.ndarray,
    n: int,
    use_bias: bool = True,
    threads: int = 1,
) -> list[list[ScoredHit]]:
    """Per-query :func:`top_n` over a query matrix; output order matches input.

    Each query is scanned independently, so results are identical for any
    thread count.
    """
    queries = np.asarray(queries)
    if queries.ndim != 2:
        raise ValueError("queries must be a 2-dimensional matrix")
    rows = [queries[i] for i in range(queries.shape[0])]
    if threads <= 1 or len(rows) <= 1:
        return [top_n(index, q, n, use_bias) for q in rows]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda q: top_n(index, q, n, use_bias), rows))
