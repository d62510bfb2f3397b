import json

import pytest
import torch

from reply_trainer import (
    TrainConfig,
    build_training_sequences,
    build_vocabulary,
    load_checkpoint,
    predict_reply_sets,
    save_checkpoint,
    train,
)

from conftest import cluster_rows, write_jsonl, write_pool


def _overfit_setup(tmp_path, n=40):
    rows = cluster_rows(n_per_cluster=max(2, (n + 2) // 3))[:n]
    pool = write_pool(tmp_path / "pool.jsonl", [r["reply"] for r in rows])
    records = [
        {"message_id": i, "message": rows[i]["context"],
         "reply_ids": [i, (i + 7) % n, (i + 13) % n],
         "replies": [], "gains": [], "ranks": []}
        for i in range(n)
    ]
    boot = write_jsonl(tmp_path / "boot.jsonl", records)
    vocab = build_vocabulary(pool, [r["message"] for r in records])
    examples = build_training_sequences(boot, vocab)
    return vocab, examples, records


def _sequence_accuracy(model, vocab, examples):
    hits = 0
    for ex in examples:
        src = torch.tensor([list(ex.src_ids)])
        decoded = model.greedy_reply_tokens(src, len(ex.target_reply_ids))[0]
        want = [vocab.reply_token(r) for r in ex.target_reply_ids]
        hits += decoded.tolist() == want
    return hits / len(examples)


def test_overfit_loss_decreases_and_memorizes(tmp_path):
    vocab, examples, records = _overfit_setup(tmp_path, n=40)
    cfg = TrainConfig(max_steps=800, eval_interval=20, warmup_steps=20, batch_size=16,
                      d_model=64, n_heads=4, n_layers=2, ff_dim=128, seed=0)
    model, history = train(examples, vocab, cfg)
    losses = [h.train_loss for h in history]
    first_ten = losses[:10]
    assert all(b < a for a, b in zip(first_ten, first_ten[1:])), first_ten
    accuracy = _sequence_accuracy(model, vocab, examples)
    assert accuracy >= 0.95, f"sequence accuracy {accuracy}"


def test_divergence_aborts_with_diagnostics(tmp_path):
    vocab, examples, _ = _overfit_setup(tmp_path, n=12)
    cfg = TrainConfig(max_steps=50, eval_interval=50, warmup_steps=1, batch_size=4,
                      learning_rate=1e12, d_model=32, n_heads=2, n_layers=1, ff_dim=32)
    with pytest.raises(RuntimeError, match="diverged at step"):
        train(examples, vocab, cfg)


def test_checkpoint_round_trip(tmp_path):
    vocab, examples, _ = _overfit_setup(tmp_path, n=12)
    cfg = TrainConfig(max_steps=30, eval_interval=30, warmup_steps=5, batch_size=4,
                      d_model=32, n_heads=2, n_layers=1, ff_dim=64)
    model, _ = train(examples, vocab, cfg)
    path = tmp_path / "ckpt.pt"
    save_checkpoint(model, vocab, cfg, path)
    loaded_model, loaded_vocab, loaded_cfg = load_checkpoint(path)
    assert loaded_cfg == cfg
    assert loaded_vocab.reply_texts == vocab.reply_texts
    messages = [(i, ex.message) for i, ex in enumerate(examples[:5])]
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    predict_reply_sets(model, vocab, messages, 3, a)
    predict_reply_sets(loaded_model, loaded_vocab, messages, 3, b)
    assert a.read_bytes() == b.read_bytes()


def test_early_stopping_on_stalled_metrics(tmp_path):
    # tiny model + tiny data: metrics saturate immediately, patience kicks in
    rows = cluster_rows(n_per_cluster=4)
    valid = write_jsonl(tmp_path / "valid.jsonl", rows[:6])
    vocab, examples, _ = _overfit_setup(tmp_path, n=12)
    cfg = TrainConfig(max_steps=2000, eval_interval=10, warmup_steps=5, batch_size=4,
                      d_model=32, n_heads=2, n_layers=1, ff_dim=64,
                      early_stop_patience=2)
    model, history = train(examples, vocab, cfg, valid_corpus=valid, k=3,
                           workdir=tmp_path / "scratch")
    assert history[-1].step < cfg.max_steps
    assert history[-1].rouge is not None
    assert len(history) >= cfg.early_stop_patience


def test_predictions_file_format(tmp_path):
    vocab, examples, _ = _overfit_setup(tmp_path, n=12)
    cfg = TrainConfig(max_steps=20, eval_interval=20, warmup_steps=5, batch_size=4,
                      d_model=32, n_heads=2, n_layers=1, ff_dim=64)
    model, _ = train(examples, vocab, cfg)
    out = tmp_path / "preds.jsonl"
    predict_reply_sets(model, vocab, [(7, "engine piston"), (9, "ocean reef")], 3, out,
                       header={"_config": {"k": 3}})
    lines = out.read_text(encoding="utf-8").splitlines()
    assert json.loads(lines[0]) == {"_config": {"k": 3}}
    for line in lines[1:]:
        rec = json.loads(line)
        assert set(rec) == {"message_id", "replies"}
        assert len(rec["replies"]) == 3
        assert len(set(rec["replies"])) == 3
        assert all(isinstance(r, str) for r in rec["replies"])
