"""Dialogue corpus ingestion, candidate pool construction, and unigram LM bias.

The candidate pool is the deduplicated universe of replies a retrieval system
can suggest. Each pool entry carries a length-normalized unigram log-probability
(``lm_bias``, in nats) used to downweight overly specific replies at retrieval
time.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np


class CorpusFormatError(ValueError):
    """A corpus or pool file violates the expected JSON-lines schema."""


@dataclass(frozen=True)
class DialoguePair:
    """One (message, reply) example.

    ``context`` already includes any persona prefix applied at load time.
    """

    message_id: int
    context: str
    reply: str
    persona: tuple[str, ...] | None = None


@dataclass(frozen=True, eq=False)
class CandidatePool:
    """Deduplicated reply universe with per-reply LM bias and token cache.

    ``reply_id`` is the position in ``replies`` (first-occurrence order).
    ``zero_token_replies`` flags ids whose text tokenizes to nothing; their
    bias is pinned to the most negative finite bias in the pool.
    """

    replies: tuple[str, ...]
    lm_bias: np.ndarray  # float64, one value per reply, all finite and <= 0
    token_cache: tuple[tuple[str, ...], ...]
    zero_token_replies: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if len(self.replies) != len(self.token_cache) or len(self.replies) != self.lm_bias.shape[0]:
            raise ValueError("pool fields must have one entry per reply")
        self.lm_bias.flags.writeable = False

    def __len__(self) -> int:
        return len(self.replies)


def normalize_and_tokenize(text: str) -> list[str]:
    """Lowercase, trim, and split on whitespace runs.

    Punctuation stays attached to its token; pre-tokenized corpora already
    separate it with spaces. Empty input yields an empty list.
    """
    return text.lower().split()


def _persona_context(persona: tuple[str, ...], context: str) -> str:
    return " ".join(persona) + " " + context


def load_dialogue_corpus(path: str | Path, persona_mode: bool = False) -> list[DialoguePair]:
    """Read a JSON-lines corpus of ``{"context", "reply", "persona"?}`` objects.

    ``message_id`` is the 0-based line index. With ``persona_mode`` the persona
    sentences are joined with single spaces and prepended to the context.
    """
    pairs: list[DialoguePair] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"line {lineno}: malformed JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise CorpusFormatError(f"line {lineno}: expected a JSON object")
            for fname in ("context", "reply"):
                if fname not in obj:
                    raise CorpusFormatError(f"line {lineno}: missing required field '{fname}'")
                if not isinstance(obj[fname], str):
                    raise CorpusFormatError(f"line {lineno}: field '{fname}' must be a string")
                if not obj[fname].strip():
                    raise CorpusFormatError(f"line {lineno}: field '{fname}' is empty after trimming")
            persona = obj.get("persona")
            if persona is not None:
                if not isinstance(persona, list) or not all(isinstance(p, str) for p in persona):
                    raise CorpusFormatError(f"line {lineno}: field 'persona' must be a list of strings")
                persona = tuple(persona)
            context = obj["context"]
            if persona_mode and persona:
                context = _persona_context(persona, context)
            pairs.append(
                DialoguePair(message_id=lineno - 1, context=context, reply=obj["reply"], persona=persona)
            )
    return pairs


def compute_lm_bias(
    token_lists: Iterable[tuple[str, ...]] | Iterable[list[str]],
    unigram_counts: Mapping[str, int],
) -> np.ndarray:
    """Mean per-token log unigram probability for each token list, in nats.

    Probabilities use add-one smoothing over the training vocabulary:
    ``p(w) = (count(w) + 1) / (total + |vocab|)``. A zero-token list gets the
    most negative finite value among the other lists (0.0 if there is none).
    """
    total = sum(unigram_counts.values())
    vocab_size = len(unigram_counts)
    denom = total + vocab_size
    if denom == 0:
        raise ValueError("unigram counts are empty")
    log_p = {w: math.log((c + 1) / denom) for w, c in unigram_counts.items()}
    unseen = math.log(1.0 / denom)

    values: list[float | None] = []
    for tokens in token_lists:
        if not tokens:
            values.append(None)
            continue
        values.append(sum(log_p.get(t, unseen) for t in tokens) / len(tokens))
    finite = [v for v in values if v is not None]
    floor = min(finite) if finite else 0.0
    return np.array([floor if v is None else v for v in values], dtype=np.float64)


def build_candidate_pool(pairs: list[DialoguePair]) -> CandidatePool:
    """Deduplicate the reply side of ``pairs`` into a candidate pool.

    Replies are normalized (lowercase, whitespace collapse) and kept in
    first-occurrence order; unigram counts for the LM bias are gathered over
    the full reply side, duplicates included.
    """
    if not pairs:
        raise ValueError("cannot build a candidate pool from an empty corpus")
    counts: Counter[str] = Counter()
    replies: list[str] = []
    token_cache: list[tuple[str, ...]] = []
    seen: set[str] = set()
    for pair in pairs:
        tokens = normalize_and_tokenize(pair.reply)
        counts.update(tokens)
        normalized = " ".join(tokens)
        if normalized in seen:
            continue
        seen.add(normalized)
        replies.append(normalized)
        token_cache.append(tuple(tokens))
    lm_bias = compute_lm_bias(token_cache, counts)
    flagged = tuple(i for i, t in enumerate(token_cache) if not t)
    return CandidatePool(
        replies=tuple(replies),
        lm_bias=lm_bias,
        token_cache=tuple(token_cache),
        zero_token_replies=flagged,
    )


def save_pool(pool: CandidatePool, path: str | Path, header: dict | None = None) -> None:
    """Write a pool as JSON-lines ``{"reply_id", "text", "lm_bias"}`` ordered by id.

    ``header``, when given, is emitted as a first line before the records.
    """
    with open(path, "w", encoding="utf-8") as fh:
        if header is not None:
            fh.write(json.dumps(header, ensure_ascii=False) + "\n")
        for reply_id, (text, bias) in enumerate(zip(pool.replies, pool.lm_bias)):
            fh.write(
                json.dumps(
                    {"reply_id": reply_id, "text": text, "lm_bias": float(bias)},
                    ensure_ascii=False,
                )
                + "\n"
            )


def load_pool(path: str | Path) -> CandidatePool:
    """Read a pool file written by :func:`save_pool`, skipping any header line."""
    replies: list[str] = []
    bias: list[float] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"line {lineno}: malformed JSON ({exc.msg})") from exc
            if lineno == 1 and isinstance(obj, dict) and "reply_id" not in obj:
                continue  # config-echo header
            for fname in ("reply_id", "text", "lm_bias"):
                if fname not in obj:
                    raise CorpusFormatError(f"line {lineno}: missing required field '{fname}'")
            if obj["reply_id"] != len(replies):
                raise CorpusFormatError(
                    f"line {lineno}: reply_id {obj['reply_id']} out of order (expected {len(replies)})"
                )
            replies.append(obj["text"])
            bias.append(float(obj["lm_bias"]))
    if not replies:
        raise CorpusFormatError("pool file contains no records")
    token_cache = tuple(tuple(normalize_and_tokenize(r)) for r in replies)
    flagged = tuple(i for i, t in enumerate(token_cache) if not t)
    return CandidatePool(
        replies=tuple(replies),
        lm_bias=np.asarray(bias, dtype=np.float64),
        token_cache=token_cache,
        zero_token_replies=flagged,
    )
