"""Reply-set planning: simulated user, expected-similarity objective, greedy search.

A planned reply set maximizes the probability-weighted similarity between the
set and replies a user is likely to send, minus a redundancy penalty against
replies already selected. Offline planning may blend the ground-truth reply
embedding into the query; online planning uses the message embedding alone.
"""

from __future__ import annotations

import json
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .corpus import CandidatePool, DialoguePair
from .encoder import HashedTfidfEncoder, augment_query
from .index import RetrievalIndex, ScoredHit, select_top


@dataclass(frozen=True)
class PlannerConfig:
    """Search hyperparameters for reply-set planning."""

    n_candidates: int = 100  # shortlist size N
    n_simulations: int = 100  # simulated user replies M
    set_size: int = 3  # replies per set K
    alpha: float = 0.75  # query interpolation weight
    lambda_redundancy: float = 0.05
    beta: float = 0.1  # LM-bias weight
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_candidates < 1 or self.n_simulations < 1 or self.set_size < 1:
            raise ValueError("n_candidates, n_simulations and set_size must be >= 1")
        if self.set_size > self.n_candidates:
            raise ValueError("set_size must not exceed n_candidates")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if self.lambda_redundancy < 0:
            raise ValueError("lambda_redundancy must be >= 0")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")


@dataclass(frozen=True)
class SimulatedUser:
    """Softmax distribution over the most likely replies for one message."""

    reply_ids: tuple[int, ...]
    probs: np.ndarray  # float64, sums to 1

    def __post_init__(self) -> None:
        if len(self.reply_ids) != self.probs.shape[0]:
            raise ValueError("reply_ids and probs must have equal length")
        self.probs.flags.writeable = False

    @property
    def entropy(self) -> float:
        p = self.probs[self.probs > 0]
        return float(-(p * np.log(p)).sum())


@dataclass(frozen=True)
class ReplySet:
    """Ordered selection of replies; order is the greedy selection order."""

    reply_ids: tuple[int, ...]
    texts: tuple[str, ...]
    marginal_gains: tuple[float, ...]  # winning objective value at each step
    diagnostics: dict | None = None


@dataclass(frozen=True)
class BootstrapRecord:
    """One planned (message, reply set) example with search diagnostics."""

    message_id: int
    message: str
    reply_set: ReplySet
    ranks: tuple[int, ...]  # 1-based rank of each pick within the shortlist
    q_entropy: float


def simulate_user(raw_scores: Sequence[float] | np.ndarray, ids: Sequence[int]) -> SimulatedUser:
    """Softmax over retrieval scores, computed with max-subtraction."""
    scores = np.asarray(raw_scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("simulate_user needs at least one score")
    if scores.shape[0] != len(ids):
        raise ValueError("scores and ids must have equal length")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    z = np.exp(scores - scores.max())
    return SimulatedUser(reply_ids=tuple(int(i) for i in ids), probs=z / z.sum())


def term_f1(a: Sequence[str], b: Sequence[str]) -> float:
    """Token-multiset F1 between two token lists.

    With overlap ``o``, precision is ``o/|a|`` and recall ``o/|b|``; their
    harmonic mean simplifies to ``2*o / (|a| + |b|)``. Zero when either list
    is empty or nothing overlaps.
    """
    if not a or not b:
        return 0.0
    ca = Counter(a)
    cb = Counter(b)
    if len(cb) < len(ca):
        ca, cb = cb, ca
    overlap = sum(min(c, cb[t]) for t, c in ca.items() if t in cb)
    if overlap == 0:
        return 0.0
    return 2.0 * overlap / (len(a) + len(b))


def set_similarity(members: Iterable[Sequence[str]], y: Sequence[str]) -> float:
    """Max token F1 between ``y`` and any member; 0 for an empty set."""
    return max((term_f1(m, y) for m in members), default=0.0)


def expected_similarity(
    members: Iterable[Sequence[str]], sim_user: SimulatedUser, pool: CandidatePool
) -> float:
    """Probability-weighted set similarity against each simulated reply."""
    members = list(members)
    total = 0.0
    for rid, prob in zip(sim_user.reply_ids, sim_user.probs):
        total += float(prob) * set_similarity(members, pool.token_cache[rid])
    return total


class TokenSetCache:
    """Occurrence-tagged token sets for fast exact multiset F1 between pool replies.

    The i-th occurrence of a token becomes one set element, so plain set
    intersection size equals the multiset overlap. Build eagerly (``build_all``)
    before sharing across threads.
    """

    def __init__(self, pool: CandidatePool):
        self._tokens = pool.token_cache
        self._stride = max((len(t) for t in pool.token_cache), default=0) + 1
        self._vocab: dict[str, int] = {}
        self._sets: dict[int, frozenset[int]] = {}

    def build_all(self) -> None:
        for rid in range(len(self._tokens)):
            self.occurrence_set(rid)

    def occurrence_set(self, rid: int) -> frozenset[int]:
        cached = self._sets.get(rid)
        if cached is not None:
            return cached
        vocab = self._vocab
        stride = self._stride
        seen: Counter[str] = Counter()
        items = []
        for token in self._tokens[rid]:
            tid = vocab.setdefault(token, len(vocab))
            items.append(tid * stride + seen[token])
            seen[token] += 1
        result = frozenset(items)
        self._sets[rid] = result
        return result

    def f1(self, a: int, b: int) -> float:
        la = len(self._tokens[a])
        lb = len(self._tokens[b])
        if la == 0 or lb == 0:
            return 0.0
        if a == b:
            return 1.0
        overlap = len(self.occurrence_set(a) & self.occurrence_set(b))
        if overlap == 0:
            return 0.0
        return 2.0 * overlap / (la + lb)


def greedy_select(
    shortlist: Sequence[ScoredHit],
    sim_user: SimulatedUser,
    pool: CandidatePool,
    k: int,
    lambda_redundancy: float,
    cache: TokenSetCache | None = None,
) -> ReplySet:
    """Greedily build a K-reply set from the shortlist.

    Each step appends the candidate maximizing
    ``expected_similarity(selected + candidate) - lambda * set_similarity(selected, candidate)``,
    breaking ties toward the smaller reply id. Per-candidate F1 values against
    the simulated replies are computed once and prior-step maxima are reused.
    """
    if len(shortlist) < k:
        raise ValueError(f"shortlist has {len(shortlist)} candidates, need at least {k}")
    if cache is None:
        cache = TokenSetCache(pool)
    cand_ids = np.array([h.reply_id for h in shortlist], dtype=np.int64)
    sim_ids = sim_user.reply_ids
    q = sim_user.probs
    n, m = len(cand_ids), len(sim_ids)

    f_sim = np.empty((n, m), dtype=np.float64)
    for i, cid in enumerate(cand_ids):
        ci = int(cid)
        for j, sid in enumerate(sim_ids):
            f_sim[i, j] = cache.f1(ci, sid)

    best_per_sim = np.zeros(m, dtype=np.float64)
    penalty = np.zeros(n, dtype=np.float64)
    available = np.ones(n, dtype=bool)
    picked_ids: list[int] = []
    gains: list[float] = []

    for _ in range(k):
        objective = np.maximum(f_sim, best_per_sim) @ q - lambda_redundancy * penalty
        objective[~available] = -np.inf
        best_value = objective.max()
        tied = np.flatnonzero(objective == best_value)
        pick = int(tied[np.argmin(cand_ids[tied])])
        picked = int(cand_ids[pick])

        picked_ids.append(picked)
        gains.append(float(best_value))
        available[pick] = False
        best_per_sim = np.maximum(best_per_sim, f_sim[pick])
        for i in np.flatnonzero(available):
            penalty[i] = max(penalty[i], cache.f1(picked, int(cand_ids[i])))

    return ReplySet(
        reply_ids=tuple(picked_ids),
        texts=tuple(pool.replies[i] for i in picked_ids),
        marginal_gains=tuple(gains),
    )


def plan_from_vectors(
    message_vec: np.ndarray,
    reply_vec: np.ndarray | None,
    index: RetrievalIndex,
    pool: CandidatePool,
    cfg: PlannerConfig,
    mode: str = "offline",
    message_id: int = 0,
    message_text: str = "",
    cache: TokenSetCache | None = None,
) -> BootstrapRecord:
    """Plan one reply set from precomputed embeddings.

    Offline mode interpolates the ground-truth reply vector into the query;
    online mode (no ground-truth access) retrieves with the message vector
    alone. The shortlist is ranked with the LM bias, the simulated user
    without it.
    """
    if mode not in ("offline", "online"):
        raise ValueError("mode must be 'offline' or 'online'")
    if mode == "offline":
        if reply_vec is None:
            raise ValueError("offline mode requires the ground-truth reply vector")
        query = augment_query(message_vec, reply_vec, cfg.alpha)
    else:
        query = message_vec

    raw = index.raw_scores(query)
    biased = index.biased_scores(raw)
    shortlist_ids = select_top(biased, cfg.n_candidates)
    sim_ids = select_top(raw, cfg.n_simulations)

    shortlist = [ScoredHit(int(i), float(biased[i]), float(raw[i])) for i in shortlist_ids]
    sim_user = simulate_user(raw[sim_ids], [int(i) for i in sim_ids])
    reply_set = greedy_select(shortlist, sim_user, pool, cfg.set_size, cfg.lambda_redundancy, cache)

    rank_of = {int(rid): r + 1 for r, rid in enumerate(shortlist_ids)}
    ranks = tuple(rank_of[rid] for rid in reply_set.reply_ids)
    return BootstrapRecord(
        message_id=message_id,
        message=message_text,
        reply_set=reply_set,
        ranks=ranks,
        q_entropy=sim_user.entropy,
    )


def plan_reply_set(
    pair: DialoguePair,
    encoder: HashedTfidfEncoder,
    index: RetrievalIndex,
    pool: CandidatePool,
    cfg: PlannerConfig,
    mode: str = "offline",
    cache: TokenSetCache | None = None,
) -> BootstrapRecord:
    """Encode one dialogue pair and plan its reply set."""
    message_vec = encoder.encode(pair.context)
    reply_vec = encoder.encode(pair.reply) if mode == "offline" else None
    return plan_from_vectors(
        message_vec,
        reply_vec,
        index,
        pool,
        cfg,
        mode=mode,
        message_id=pair.message_id,
        message_text=pair.context,
        cache=cache,
    )


def _iter_planned(
    tasks: Sequence[Callable[[], BootstrapRecord]],
    message_ids: Sequence[int],
    threads: int,
) -> Iterator[BootstrapRecord]:
    if threads <= 1:
        for mid, task in zip(message_ids, tasks):
            try:
                yield task()
            except Exception as exc:
                raise RuntimeError(f"planning failed for message_id={mid}: {exc}") from exc
        return
    with ThreadPoolExecutor(max_workers=threads) as executor:
        futures = [executor.submit(task) for task in tasks]
        for mid, future in zip(message_ids, futures):
            try:
                yield future.result()
            except Exception as exc:
                raise RuntimeError(f"planning failed for message_id={mid}: {exc}") from exc


def iter_bootstrap(
    pairs: Sequence[DialoguePair],
    encoder: HashedTfidfEncoder,
    index: RetrievalIndex,
    pool: CandidatePool,
    cfg: PlannerConfig,
    mode: str = "offline",
    threads: int = 1,
) -> Iterator[BootstrapRecord]:
    """Plan every pair, yielding records in input order. Deterministic for a fixed config."""
    cache = TokenSetCache(pool)
    cache.build_all()
    tasks = [
        (lambda p=pair: plan_reply_set(p, encoder, index, pool, cfg, mode=mode, cache=cache))
        for pair in pairs
    ]
    yield from _iter_planned(tasks, [p.message_id for p in pairs], threads)


def iter_bootstrap_from_matrices(
    pairs: Sequence[DialoguePair],
    message_matrix: np.ndarray,
    reply_matrix: np.ndarray | None,
    index: RetrievalIndex,
    pool: CandidatePool,
    cfg: PlannerConfig,
    mode: str = "offline",
    threads: int = 1,
    cache: TokenSetCache | None = None,
) -> Iterator[BootstrapRecord]:
    """Like :func:`iter_bootstrap` but with precomputed per-pair embedding rows."""
    if message_matrix.shape[0] != len(pairs):
        raise ValueError("message matrix rows must equal the number of pairs")
    if mode == "offline":
        if reply_matrix is None:
            raise ValueError("offline mode requires a reply-side matrix")
        if reply_matrix.shape[0] != len(pairs):
            raise ValueError("reply matrix rows must equal the number of pairs")
    if cache is None:
        cache = TokenSetCache(pool)
        cache.build_all()
    tasks = [
        (
            lambda i=i, pair=pair: plan_from_vectors(
                message_matrix[i],
                reply_matrix[i] if mode == "offline" else None,
                index,
                pool,
                cfg,
                mode=mode,
                message_id=pair.message_id,
                message_text=pair.context,
                cache=cache,
            )
        )
        for i, pair in enumerate(pairs)
    ]
    yield from _iter_planned(tasks, [p.message_id for p in pairs], threads)


def bootstrap_dataset(
    pairs: Sequence[DialoguePair],
    encoder: HashedTfidfEncoder,
    index: RetrievalIndex,
    pool: CandidatePool,
    cfg: PlannerConfig,
    mode: str = "offline",
    threads: int = 1,
) -> list[BootstrapRecord]:
    """Plan the whole corpus into (message, reply set) records, input order preserved."""
    return list(iter_bootstrap(pairs, encoder, index, pool, cfg, mode=mode, threads=threads))


def write_bootstrap_file(
    records: Iterable[BootstrapRecord], path: str | Path, header: dict | None = None
) -> None:
    """Write records as JSON-lines; one line per message, optional header first."""
    with open(path, "w", encoding="utf-8") as fh:
        if header is not None:
            fh.write(json.dumps(header, ensure_ascii=False) + "\n")
        for rec in records:
            fh.write(
                json.dumps(
                    {
                        "message_id": rec.message_id,
                        "message": rec.message,
                        "reply_ids": list(rec.reply_set.reply_ids),
                        "replies": list(rec.reply_set.texts),
                        "gains": list(rec.reply_set.marginal_gains),
                        "ranks": list(rec.ranks),
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_bootstrap_file(path: str | Path) -> list[dict]:
    """Read a bootstrap JSON-lines file, skipping any header line."""
    records: list[dict] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            obj = json.loads(line)
            if lineno == 1 and isinstance(obj, dict) and "message_id" not in obj:
                continue
            records.append(obj)
    return records
