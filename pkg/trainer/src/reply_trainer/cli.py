"""Trainer CLI: fine-tune on a bootstrap file, then emit predictions.

Consumes the candidate-pool and bootstrap files produced by the `replyset`
pipeline and writes predictions in the format its `evaluate` command scores.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields

from .data import TrainConfig, build_training_sequences
from .predict import predict_reply_sets
from .train import load_checkpoint, save_checkpoint, train
from .vocab import build_vocabulary


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reply-trainer", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fine-tune on a bootstrapped dataset")
    p.add_argument("--bootstrap", required=True, help="bootstrap JSON-lines file")
    p.add_argument("--pool", required=True, help="candidate pool file")
    p.add_argument("--valid-corpus", help="corpus for metric-based early stopping")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--k", type=int, default=3, help="replies per set for validation decoding")
    for f in fields(TrainConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.type == "bool":
            p.add_argument(flag, dest=f.name, action="store_true", default=None)
        else:
            p.add_argument(flag, dest=f.name, type=type(f.default), default=None)

    p = sub.add_parser("predict", help="decode reply sets for a corpus")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True, help="JSON-lines corpus with 'context' fields")
    p.add_argument("--out", required=True, help="predictions file to write")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--allow-repeats", action="store_true",
                   help="mask only non-reply tokens while decoding")
    return parser


def cmd_train(args: argparse.Namespace) -> int:
    overrides = {
        f.name: getattr(args, f.name)
        for f in fields(TrainConfig)
        if getattr(args, f.name, None) is not None
    }
    cfg = TrainConfig(**overrides)
    messages = []
    with open(args.bootstrap, encoding="utf-8") as fh:
        for line in fh:
            obj = json.loads(line)
            if "message" in obj:
                messages.append(obj["message"])
    vocab = build_vocabulary(args.pool, messages)
    examples = build_training_sequences(args.bootstrap, vocab,
                                        max_message_len=cfg.max_message_len,
                                        separate_replies=cfg.separate_replies)
    model, history = train(examples, vocab, cfg, valid_corpus=args.valid_corpus, k=args.k)
    save_checkpoint(model, vocab, cfg, args.out)
    last = history[-1]
    line = f"train: {len(examples)} examples, stopped at step {last.step}, loss {last.train_loss:.4f}"
    if last.rouge is not None:
        line += f", rouge {last.rouge:.2f}, self-rouge {last.self_rouge:.2f}"
    print(line)
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    model, vocab, cfg = load_checkpoint(args.checkpoint)
    messages = []
    with open(args.corpus, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            obj = json.loads(line)
            messages.append((i, obj["context"]))
    predict_reply_sets(
        model, vocab, messages, args.k, args.out,
        block_repeats=not args.allow_repeats,
        independent=cfg.separate_replies,
        max_message_len=cfg.max_message_len,
    )
    print(f"predict: {len(messages)} messages -> {args.out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return {"train": cmd_train, "predict": cmd_predict}[args.command](args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
