"""Training configuration and supervised sequences from a bootstrap file."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .vocab import ReplyVocabulary


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5e-4
    warmup_steps: int = 1000
    max_steps: int = 100_000
    eval_interval: int = 2000
    max_message_len: int = 64
    seed: int = 0
    batch_size: int = 32
    init: str = "bow"  # "random" reproduces the tabula-rasa ablation
    separate_replies: bool = False  # train on (message, reply_k) singletons
    block_repeats: bool = True  # mask already-emitted replies while decoding
    d_model: int = 128
    n_heads: int = 4
    n_layers: int = 2
    ff_dim: int = 256
    early_stop_patience: int = 3  # evals with no metric improvement

    def __post_init__(self) -> None:
        numeric = (
            self.learning_rate, self.warmup_steps, self.max_steps,
            self.eval_interval, self.max_message_len, self.batch_size,
        )
        if any(v <= 0 for v in numeric):
            raise ValueError("all numeric training settings must be positive")
        if self.init not in ("bow", "random"):
            raise ValueError("init must be 'bow' or 'random'")


@dataclass(frozen=True)
class TrainingExample:
    message_id: int
    message: str
    src_ids: tuple[int, ...]
    target_reply_ids: tuple[int, ...]  # planner selection order preserved


def build_training_sequences(
    bootstrap_path: str | Path,
    vocab: ReplyVocabulary,
    max_message_len: int = 64,
    separate_replies: bool = False,
) -> list[TrainingExample]:
    """Supervised pairs from a bootstrap JSON-lines file.

    The target is the ordered sequence of reply tokens exactly as the planner
    selected them. With ``separate_replies`` each record is restructured into
    one example per reply, discarding the interdependency signal.
    """
    examples: list[TrainingExample] = []
    with open(bootstrap_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            obj = json.loads(line)
            if lineno == 1 and "message_id" not in obj:
                continue  # config-echo header
            reply_ids = obj["reply_ids"]
            if not reply_ids:
                raise ValueError(f"line {lineno}: record has no replies")
            for rid in reply_ids:
                if not 0 <= rid < vocab.n_replies:
                    raise ValueError(f"line {lineno}: unknown reply_id {rid}")
            src = tuple(vocab.tokenizer.encode(obj["message"], max_len=max_message_len))
            if separate_replies:
                for rid in reply_ids:
                    examples.append(TrainingExample(obj["message_id"], obj["message"],
                                                    src, (rid,)))
            else:
                examples.append(TrainingExample(obj["message_id"], obj["message"],
                                                src, tuple(reply_ids)))
    if not examples:
        raise ValueError("bootstrap file contains no records")
    return examples
