"""Reference reply-set selectors: plain top-K, MMR, and topic-deduplicated top-K.

All selectors consume the same retrieval index and emit the same ``ReplySet``
shape as the planner, so any of them can feed the evaluator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import CandidatePool, CorpusFormatError
from .index import RetrievalIndex, ScoredHit, top_n
from .planner import ReplySet


@dataclass(frozen=True)
class TopicAssignment:
    """Cluster id per pool reply."""

    topic_of: np.ndarray  # int64, one topic per reply
    n_topics: int

    def __post_init__(self) -> None:
        self.topic_of.flags.writeable = False


def matching_topk(index: RetrievalIndex, pool: CandidatePool, query: np.ndarray, k: int) -> ReplySet:
    """Top-K replies by biased score, no diversification."""
    hits = top_n(index, query, k, use_bias=True)
    if len(hits) < k:
        raise ValueError(f"pool has only {len(hits)} replies, need {k}")
    return ReplySet(
        reply_ids=tuple(h.reply_id for h in hits),
        texts=tuple(pool.replies[h.reply_id] for h in hits),
        marginal_gains=tuple(h.score for h in hits),
    )


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return matrix / norms


def mmr_select(
    index: RetrievalIndex,
    pool: CandidatePool,
    query: np.ndarray,
    k: int,
    theta: float = 0.5,
    n_shortlist: int = 100,
) -> ReplySet:
    """Maximum-marginal-relevance selection over the biased shortlist.

    Step score is ``theta * biased_score - (1 - theta) * max_sim`` where
    ``max_sim`` is the largest normalized dot product against the already
    selected replies. With ``theta = 1`` this reduces to :func:`matching_topk`.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must be in [0, 1]")
    if k < 1:
        raise ValueError("k must be >= 1")
    hits = top_n(index, query, max(n_shortlist, k), use_bias=True)
    if len(hits) < k:
        raise ValueError(f"pool has only {len(hits)} replies, need {k}")
    ids = np.array([h.reply_id for h in hits], dtype=np.int64)
    rel = np.array([h.score for h in hits], dtype=np.float64)
    vectors = _unit_rows(index.matrix[ids].astype(np.float64))

    max_sim = np.zeros(len(hits), dtype=np.float64)
    available = np.ones(len(hits), dtype=bool)
    picked: list[int] = []
    gains: list[float] = []
    for _ in range(k):
        score = theta * rel - (1.0 - theta) * max_sim
        score[~available] = -np.inf
        best = score.max()
        tied = np.flatnonzero(score == best)
        pick = int(tied[np.argmin(ids[tied])])
        picked.append(int(ids[pick]))
        gains.append(float(best))
        available[pick] = False
        max_sim = np.maximum(max_sim, vectors @ vectors[pick])
    return ReplySet(
        reply_ids=tuple(picked),
        texts=tuple(pool.replies[i] for i in picked),
        marginal_gains=tuple(gains),
    )


def assign_topics(reply_matrix: np.ndarray, n_topics: int, seed: int = 0) -> TopicAssignment:
    """K-means over unit-normalized reply vectors; deterministic for a fixed seed.

    Runs 25 Lloyd iterations; a cluster that empties is re-seeded from the
    point currently farthest from its assigned centroid.
    """
    if n_topics < 2:
        raise ValueError("n_topics must be >= 2")
    rows = reply_matrix.shape[0]
    if n_topics > rows:
        raise ValueError(f"n_topics {n_topics} exceeds pool size {rows}")
    points = _unit_rows(np.asarray(reply_matrix, dtype=np.float64))
    rng = np.random.default_rng(seed)
    centroids = points[rng.choice(rows, size=n_topics, replace=False)].copy()

    assignment = np.zeros(rows, dtype=np.int64)
    for _ in range(25):
        # squared Euclidean distance via the dot-product expansion
        dots = points @ centroids.T
        sq = (points * points).sum(axis=1)[:, None] + (centroids * centroids).sum(axis=1)[None, :]
        dist = sq - 2.0 * dots
        assignment = dist.argmin(axis=1)
        own_dist = dist[np.arange(rows), assignment].copy()
        for topic in range(n_topics):
            members = assignment == topic
            if members.any():
                centroids[topic] = points[members].mean(axis=0)
            else:
                farthest = int(np.argmax(own_dist))
                centroids[topic] = points[farthest]
                assignment[farthest] = topic
                own_dist[farthest] = -np.inf
    return TopicAssignment(topic_of=assignment, n_topics=n_topics)


def topic_dedup_select(
    index: RetrievalIndex,
    pool: CandidatePool,
    query: np.ndarray,
    k: int,
    topics: TopicAssignment,
    n_shortlist: int = 100,
) -> ReplySet:
    """Walk the biased ranking, skipping replies whose topic is already used.

    If fewer than ``k`` topics appear in the shortlist, the highest-ranked
    skipped replies fill the remaining slots (``diagnostics["fallback"]`` is
    set when that happens).
    """
    if topics.n_topics < k:
        raise ValueError("n_topics must be >= k")
    hits = top_n(index, query, max(n_shortlist, k), use_bias=True)
    if len(hits) < k:
        raise ValueError(f"pool has only {len(hits)} replies, need {k}")
    picked: list[ScoredHit] = []
    skipped: list[ScoredHit] = []
    used_topics: set[int] = set()
    for hit in hits:
        if len(picked) == k:
            break
        topic = int(topics.topic_of[hit.reply_id])
        if topic in used_topics:
            skipped.append(hit)
            continue
        used_topics.add(topic)
        picked.append(hit)
    fallback = len(picked) < k
    for hit in skipped:
        if len(picked) == k:
            break
        picked.append(hit)
    return ReplySet(
        reply_ids=tuple(h.reply_id for h in picked),
        texts=tuple(pool.replies[h.reply_id] for h in picked),
        marginal_gains=tuple(h.score for h in picked),
        diagnostics={"fallback": fallback},
    )


def write_predictions(
    rows: Iterable[tuple[int, Sequence[str]]], path: str | Path, header: dict | None = None
) -> None:
    """Write predictions as JSON-lines ``{"message_id", "replies"}``."""
    with open(path, "w", encoding="utf-8") as fh:
        if header is not None:
            fh.write(json.dumps(header, ensure_ascii=False) + "\n")
        for message_id, replies in rows:
            fh.write(
                json.dumps({"message_id": message_id, "replies": list(replies)}, ensure_ascii=False)
                + "\n"
            )


def read_predictions(path: str | Path) -> dict[int, list[str]]:
    """Read a predictions file; duplicate message ids are an error."""
    out: dict[int, list[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"line {lineno}: malformed JSON ({exc.msg})") from exc
            if lineno == 1 and isinstance(obj, dict) and "message_id" not in obj:
                continue
            for fname in ("message_id", "replies"):
                if fname not in obj:
                    raise CorpusFormatError(f"line {lineno}: missing required field '{fname}'")
            mid = obj["message_id"]
            if mid in out:
                raise CorpusFormatError(f"duplicate message_id {mid}")
            out[mid] = list(obj["replies"])
    return out
