"""Training loop: next-reply cross-entropy with metric-based early stopping.

Validation quality is measured by round-tripping decoded predictions through
the evaluation pipeline of the companion `replyset` CLI (relevance ROUGE up,
Self-ROUGE down); training stops once neither metric has improved for a few
evaluations, which in practice is a far more reliable signal than the loss.
"""

from __future__ import annotations

import json
import math
import subprocess
import sys
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .data import TrainConfig, TrainingExample
from .model import ReplySetModel
from .predict import predict_reply_sets
from .vocab import BOS_ID, PAD_ID, ReplyVocabulary, WordTokenizer

IGNORE = -100


@dataclass
class EvalPoint:
    step: int
    train_loss: float
    rouge: float | None = None
    self_rouge: float | None = None


def _pad(rows: list[list[int]], value: int) -> torch.Tensor:
    width = max(len(r) for r in rows)
    out = torch.full((len(rows), width), value, dtype=torch.long)
    for i, row in enumerate(rows):
        out[i, : len(row)] = torch.tensor(row, dtype=torch.long)
    return out


def _tensorize(batch: list[TrainingExample], vocab: ReplyVocabulary):
    src = _pad([list(ex.src_ids) or [PAD_ID] for ex in batch], PAD_ID)
    targets = [[vocab.reply_token(r) for r in ex.target_reply_ids] for ex in batch]
    tgt_in = _pad([[BOS_ID] + t[:-1] for t in targets], PAD_ID)
    labels = _pad(targets, IGNORE)
    return src, tgt_in, labels


def batch_loss(model: ReplySetModel, batch: list[TrainingExample],
               vocab: ReplyVocabulary, constrained: bool = False) -> torch.Tensor:
    """Cross-entropy over the reply positions only (padding is ignored).

    ``constrained`` restricts the softmax to reply tokens, mirroring the
    inference-time mask; training uses the full vocabulary.
    """
    src, tgt_in, labels = _tensorize(batch, vocab)
    logits = model(src, tgt_in)
    if constrained:
        logits = logits.clone()
        logits[:, :, : vocab.base_size] = float("-inf")
    return nn.functional.cross_entropy(
        logits.reshape(-1, logits.shape[-1]), labels.reshape(-1), ignore_index=IGNORE
    )


@torch.no_grad()
def dataset_loss(model: ReplySetModel, examples: list[TrainingExample],
                 vocab: ReplyVocabulary, batch_size: int = 64) -> float:
    """Deterministic mean loss over a whole dataset (token-weighted)."""
    model.eval()
    total, count = 0.0, 0
    for lo in range(0, len(examples), batch_size):
        batch = examples[lo : lo + batch_size]
        n_targets = sum(len(ex.target_reply_ids) for ex in batch)
        total += float(batch_loss(model, batch, vocab)) * n_targets
        count += n_targets
    model.train()
    return total / count


def _evaluate_via_cli(model, vocab, cfg, valid_path: Path, workdir: Path, k: int):
    """Decode the validation messages and score them with the replyset CLI."""
    messages = []
    with open(valid_path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            obj = json.loads(line)
            messages.append((i, obj["context"]))
    preds = workdir / "valid_preds.jsonl"
    predict_reply_sets(model, vocab, messages, k, preds,
                       block_repeats=cfg.block_repeats,
                       independent=cfg.separate_replies,
                       max_message_len=cfg.max_message_len)
    report = workdir / "valid_report.json"
    proc = subprocess.run(
        [sys.executable, "-m", "replyset", "evaluate",
         "--predictions", str(preds), "--test-corpus", str(valid_path),
         "--out", str(report)],
        capture_output=True, text=True,
    )
    if proc.returncode != 0:
        raise RuntimeError(f"validation scoring failed: {proc.stderr.strip()}")
    payload = json.loads(report.read_text(encoding="utf-8"))
    return payload["rouge"], payload["self_rouge"]


def train(
    examples: list[TrainingExample],
    vocab: ReplyVocabulary,
    cfg: TrainConfig,
    valid_corpus: str | Path | None = None,
    k: int = 3,
    workdir: str | Path | None = None,
) -> tuple[ReplySetModel, list[EvalPoint]]:
    """Fine-tune the suggestion model on bootstrapped sequences.

    With a validation corpus, every ``eval_interval`` steps the model is
    decoded and scored end to end; training stops early once neither ROUGE nor
    Self-ROUGE has improved for ``early_stop_patience`` consecutive
    evaluations. Returns the model and the evaluation history.
    """
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    model = ReplySetModel(vocab, d_model=cfg.d_model, n_heads=cfg.n_heads,
                          n_layers=cfg.n_layers, ff_dim=cfg.ff_dim,
                          max_positions=cfg.max_message_len + 8)
    model.initialize_reply_embeddings(mode=cfg.init, seed=cfg.seed)
    model.train()
    optimizer = torch.optim.AdamW(model.parameters(), lr=cfg.learning_rate)

    def lr_at(step: int) -> float:
        if step < cfg.warmup_steps:
            return cfg.learning_rate * (step + 1) / cfg.warmup_steps
        span = max(cfg.max_steps - cfg.warmup_steps, 1)
        return cfg.learning_rate * max(0.0, (cfg.max_steps - step) / span)

    scratch = Path(workdir) if workdir else Path(tempfile.mkdtemp(prefix="reply_trainer_"))
    scratch.mkdir(parents=True, exist_ok=True)

    history: list[EvalPoint] = []
    best_rouge, best_self = -math.inf, math.inf
    stale = 0
    order = np.arange(len(examples))
    cursor = len(order)  # force an initial shuffle

    for step in range(cfg.max_steps):
        if cursor + cfg.batch_size > len(order):
            rng.shuffle(order)
            cursor = 0
        batch = [examples[i] for i in order[cursor : cursor + cfg.batch_size]]
        cursor += cfg.batch_size

        for group in optimizer.param_groups:
            group["lr"] = lr_at(step)
        optimizer.zero_grad()
        loss = batch_loss(model, batch, vocab)
        if not torch.isfinite(loss):
            raise RuntimeError(
                f"training diverged at step {step}: loss={loss.detach().item()}"
            )
        loss.backward()
        optimizer.step()

        if (step + 1) % cfg.eval_interval == 0 or step + 1 == cfg.max_steps:
            point = EvalPoint(step=step + 1,
                              train_loss=dataset_loss(model, examples, vocab))
            if valid_corpus is not None:
                point.rouge, point.self_rouge = _evaluate_via_cli(
                    model, vocab, cfg, Path(valid_corpus), scratch, k
                )
                improved = point.rouge > best_rouge or point.self_rouge < best_self
                best_rouge = max(best_rouge, point.rouge)
                best_self = min(best_self, point.self_rouge)
                stale = 0 if improved else stale + 1
            history.append(point)
            if valid_corpus is not None and stale >= cfg.early_stop_patience:
                break
    return model, history


def save_checkpoint(model: ReplySetModel, vocab: ReplyVocabulary, cfg: TrainConfig,
                    path: str | Path) -> None:
    torch.save(
        {
            "model_state": model.state_dict(),
            "config": asdict(cfg),
            "token_to_id": vocab.tokenizer.token_to_id,
            "reply_texts": list(vocab.reply_texts),
        },
        path,
    )


def load_checkpoint(path: str | Path) -> tuple[ReplySetModel, ReplyVocabulary, TrainConfig]:
    payload = torch.load(path, weights_only=False)
    cfg = TrainConfig(**payload["config"])
    vocab = ReplyVocabulary(
        tokenizer=WordTokenizer(token_to_id=payload["token_to_id"]),
        reply_texts=tuple(payload["reply_texts"]),
    )
    model = ReplySetModel(vocab, d_model=cfg.d_model, n_heads=cfg.n_heads,
                          n_layers=cfg.n_layers, ff_dim=cfg.ff_dim,
                          max_positions=cfg.max_message_len + 8)
    model.load_state_dict(payload["model_state"])
    return model, vocab, cfg
