"""Vocabulary handling: base word tokens plus one token per candidate-pool reply.

The suggestion model decodes replies as single vocabulary tokens, so the
vocabulary is the union of the backbone's word vocabulary and one synthetic
token per pool reply. Reply token ids sit in a contiguous block after the base
vocabulary; the mapping reply token <-> reply id is the identity shifted by
the base size.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

PAD_ID = 0
BOS_ID = 1
UNK_ID = 2
_SPECIALS = ("<pad>", "<s>", "<unk>")


@dataclass(frozen=True)
class WordTokenizer:
    """Deterministic lowercase whitespace tokenizer with a fixed id table."""

    token_to_id: dict[str, int]

    @classmethod
    def fit(cls, texts: list[str]) -> "WordTokenizer":
        table = {tok: i for i, tok in enumerate(_SPECIALS)}
        for text in texts:
            for tok in text.lower().split():
                if tok not in table:
                    table[tok] = len(table)
        return cls(token_to_id=table)

    def __len__(self) -> int:
        return len(self.token_to_id)

    def tokenize(self, text: str) -> list[str]:
        return text.lower().split()

    def encode(self, text: str, max_len: int | None = None) -> list[int]:
        ids = [self.token_to_id.get(t, UNK_ID) for t in self.tokenize(text)]
        if max_len is not None:
            ids = ids[:max_len]
        return ids


@dataclass(frozen=True)
class ReplyVocabulary:
    """Base vocabulary plus one token per candidate-pool reply."""

    tokenizer: WordTokenizer
    reply_texts: tuple[str, ...]

    @property
    def base_size(self) -> int:
        return len(self.tokenizer)

    @property
    def n_replies(self) -> int:
        return len(self.reply_texts)

    @property
    def size(self) -> int:
        return self.base_size + self.n_replies

    def reply_token(self, reply_id: int) -> int:
        if not 0 <= reply_id < self.n_replies:
            raise ValueError(f"unknown reply_id {reply_id}")
        return self.base_size + reply_id

    def reply_id(self, token_id: int) -> int:
        reply_id = token_id - self.base_size
        if not 0 <= reply_id < self.n_replies:
            raise ValueError(f"token {token_id} is not a reply token")
        return reply_id

    def is_reply_token(self, token_id: int) -> bool:
        return self.base_size <= token_id < self.size


def load_pool_texts(pool_path: str | Path) -> list[str]:
    """Reply texts from a candidate-pool JSON-lines file, ordered by reply_id."""
    texts: list[str] = []
    with open(pool_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            obj = json.loads(line)
            if lineno == 1 and "reply_id" not in obj:
                continue  # config-echo header
            if obj["reply_id"] != len(texts):
                raise ValueError(f"pool file out of order at line {lineno}")
            texts.append(obj["text"])
    if not texts:
        raise ValueError("pool file contains no replies")
    return texts


def build_vocabulary(pool_path: str | Path, message_texts: list[str]) -> ReplyVocabulary:
    """Fit the base tokenizer on messages and reply texts, then append reply tokens."""
    reply_texts = load_pool_texts(pool_path)
    tokenizer = WordTokenizer.fit(list(message_texts) + reply_texts)
    return ReplyVocabulary(tokenizer=tokenizer, reply_texts=tuple(reply_texts))
