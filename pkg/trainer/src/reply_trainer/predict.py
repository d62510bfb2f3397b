"""Constrained decoding of reply sets into the evaluator's predictions format."""

from __future__ import annotations

import json
from pathlib import Path

import torch

from .model import ReplySetModel
from .vocab import PAD_ID, ReplyVocabulary


def predict_reply_sets(
    model: ReplySetModel,
    vocab: ReplyVocabulary,
    messages: list[tuple[int, str]],
    k: int,
    out_path: str | Path,
    block_repeats: bool = True,
    independent: bool = False,
    max_message_len: int = 64,
    batch_size: int = 32,
    header: dict | None = None,
) -> None:
    """Greedily decode ``k`` replies per message and write predictions JSON-lines.

    Decoding is constrained to reply tokens; with ``block_repeats`` (default)
    already-emitted replies are masked too, so every set holds distinct
    replies. ``independent`` takes the top-k of a single step instead, for
    models trained on one reply per example. Output rows are
    ``{"message_id", "replies"}`` in input order.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    with open(out_path, "w", encoding="utf-8") as fh:
        if header is not None:
            fh.write(json.dumps(header, ensure_ascii=False) + "\n")
        for lo in range(0, len(messages), batch_size):
            chunk = messages[lo : lo + batch_size]
            encoded = [vocab.tokenizer.encode(text, max_len=max_message_len) or [PAD_ID]
                       for _, text in chunk]
            width = max(len(e) for e in encoded)
            src = torch.full((len(chunk), width), PAD_ID, dtype=torch.long)
            for i, ids in enumerate(encoded):
                src[i, : len(ids)] = torch.tensor(ids, dtype=torch.long)
            if independent:
                tokens = model.first_step_topk(src, k)
            else:
                tokens = model.greedy_reply_tokens(src, k, block_repeats=block_repeats)
            for (message_id, _), row in zip(chunk, tokens.tolist()):
                replies = [vocab.reply_texts[vocab.reply_id(t)] for t in row]
                fh.write(
                    json.dumps({"message_id": message_id, "replies": replies},
                               ensure_ascii=False) + "\n"
                )
