"""Weighted ROUGE ensemble, max-over-set relevance, and Self-ROUGE diversity.

Relevance of a suggested set is the best ensemble score any member achieves
against the ground-truth reply; diversity is measured by scoring each member
against the rest of its own set (lower Self-ROUGE means more diverse).
Reported values are scaled x100 for display.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import DialoguePair, normalize_and_tokenize

_WEIGHTS = (1.0 / 6.0, 1.0 / 3.0, 1.0 / 2.0)


@dataclass(frozen=True)
class RougeScores:
    """ROUGE-1/2/3 F-measures and their weighted ensemble, all in [0, 1]."""

    r1: float
    r2: float
    r3: float

    @property
    def ensemble(self) -> float:
        return self.r1 * _WEIGHTS[0] + self.r2 * _WEIGHTS[1] + self.r3 * _WEIGHTS[2]


@dataclass(frozen=True)
class EvalReport:
    """Per-example and mean scores, scaled x100."""

    per_example: tuple[tuple[int, float, float], ...]  # (message_id, rouge, self_rouge)
    mean_rouge: float
    mean_self_rouge: float
    n: int


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(pred: Sequence[str], refs: Sequence[Sequence[str]], n: int) -> float:
    """ROUGE-N F-measure of ``pred`` against the best reference.

    N-gram overlap is clipped (multiset); a side with fewer than ``n`` tokens
    scores 0 for that pairing. Precision and recall are weighted equally.
    """
    if n not in (1, 2, 3):
        raise ValueError("n must be 1, 2 or 3")
    if not refs:
        raise ValueError("refs must contain at least one reference")
    pred_counts = _ngram_counts(pred, n)
    n_pred = max(len(pred) - n + 1, 0)
    best = 0.0
    for ref in refs:
        n_ref = max(len(ref) - n + 1, 0)
        if n_pred == 0 or n_ref == 0:
            continue
        ref_counts = _ngram_counts(ref, n)
        overlap = sum(min(c, ref_counts[g]) for g, c in pred_counts.items() if g in ref_counts)
        if overlap == 0:
            continue
        precision = overlap / n_pred
        recall = overlap / n_ref
        best = max(best, 2.0 * precision * recall / (precision + recall))
    return best


def weighted_rouge(pred: Sequence[str], refs: Sequence[Sequence[str]]) -> RougeScores:
    """ROUGE-1/2/3 against the best reference; ensemble weights 1/6, 1/3, 1/2."""
    return RougeScores(
        r1=rouge_n(pred, refs, 1),
        r2=rouge_n(pred, refs, 2),
        r3=rouge_n(pred, refs, 3),
    )


def max_rouge_over_set(reply_set: Sequence[Sequence[str]], ref: Sequence[str]) -> float:
    """Best ensemble score any set member achieves against the reference."""
    if not reply_set:
        raise ValueError("reply_set must contain at least one reply")
    return max(weighted_rouge(member, [ref]).ensemble for member in reply_set)


def self_rouge(reply_set: Sequence[Sequence[str]]) -> float:
    """Mean leave-one-out ensemble within the set; lower means more diverse."""
    k = len(reply_set)
    if k < 2:
        raise ValueError("self_rouge needs at least two replies")
    total = 0.0
    for i, member in enumerate(reply_set):
        rest = [r for j, r in enumerate(reply_set) if j != i]
        total += weighted_rouge(member, rest).ensemble
    return total / k


def evaluate(predictions: Mapping[int, Sequence[str]], pairs: Sequence[DialoguePair]) -> EvalReport:
    """Score a predictions map against ground-truth pairs.

    Every test message id must appear exactly once in the predictions, and
    every prediction id must belong to the test set. Duplicates are rejected
    when the predictions file is read.
    """
    known = {p.message_id for p in pairs}
    for mid in predictions:
        if mid not in known:
            raise ValueError(f"unknown message_id {mid} in predictions")
    per_example: list[tuple[int, float, float]] = []
    for pair in pairs:
        if pair.message_id not in predictions:
            raise ValueError(f"missing message_id {pair.message_id} in predictions")
        replies = [normalize_and_tokenize(r) for r in predictions[pair.message_id]]
        ref = normalize_and_tokenize(pair.reply)
        relevance = max_rouge_over_set(replies, ref)
        diversity = self_rouge(replies)
        per_example.append((pair.message_id, 100.0 * relevance, 100.0 * diversity))
    n = len(per_example)
    return EvalReport(
        per_example=tuple(per_example),
        mean_rouge=sum(r for _, r, _ in per_example) / n,
        mean_self_rouge=sum(s for _, _, s in per_example) / n,
        n=n,
    )


def write_report(report: EvalReport, path: str | Path, header: dict | None = None) -> None:
    """Write an evaluation report as a single JSON object."""
    payload: dict = {
        "n": report.n,
        "rouge": report.mean_rouge,
        "self_rouge": report.mean_self_rouge,
        "per_example": [
            {"message_id": mid, "rouge": r, "self_rouge": s} for mid, r, s in report.per_example
        ],
    }
    if header is not None:
        payload["_config"] = header
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False)
        fh.write("\n")


def format_report(report: EvalReport, label: str = "") -> str:
    """Fixed-width one-row summary table."""
    name = label or "predictions"
    lines = [
        f"{'system':<24} {'n':>6} {'rouge':>8} {'self_rouge':>11}",
        f"{name:<24} {report.n:>6} {report.mean_rouge:>8.2f} {report.mean_self_rouge:>11.2f}",
    ]
    return "\n".join(lines)
