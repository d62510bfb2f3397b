import json

import numpy as np
import pytest

from reply_trainer import build_vocabulary


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    return path


def write_pool(path, texts):
    return write_jsonl(
        path, [{"reply_id": i, "text": t, "lm_bias": -1.0} for i, t in enumerate(texts)]
    )


def cluster_rows(n_per_cluster=34, seed=0):
    """Message/reply rows over three disjoint-vocabulary reply clusters."""
    rng = np.random.default_rng(seed)
    bases = [
        ["apple", "orchard", "cider", "harvest"],
        ["engine", "piston", "diesel", "torque"],
        ["ocean", "tide", "surf", "reef"],
    ]
    rows = []
    for cid, base in enumerate(bases):
        for v in range(n_per_cluster):
            words = list(base)
            rng.shuffle(words)
            rows.append(
                {
                    "context": " ".join(base[:3]) + f" c{cid}ask{v}",
                    "reply": " ".join(words + [f"c{cid}fill{v}"]),
                }
            )
    return rows


def dialogue_rows(n=240, seed=1, n_topics=8, n_intents=4):
    """One-to-many topical rows: the message fixes a topic, not the intent."""
    rng = np.random.default_rng(seed)
    common = ["yes", "well", "oh", "sure"]
    topics = []
    for t in range(n_topics):
        msg_vocab = [f"t{t}m{j}" for j in range(6)]
        intents = []
        for k in range(n_intents):
            words = [f"t{t}i{k}"] + [f"t{t}r{j}" for j in rng.choice(8, size=4, replace=False)]
            intents.append(words)
        topics.append((msg_vocab, intents))
    rows = []
    for i in range(n):
        msg_vocab, intents = topics[int(rng.integers(n_topics))]
        message = " ".join(
            [msg_vocab[int(j)] for j in rng.choice(6, size=int(rng.integers(3, 6)), replace=False)]
        )
        base = list(intents[int(rng.integers(n_intents))])
        if rng.random() < 0.5:
            base[int(rng.integers(1, len(base)))] = common[int(rng.integers(len(common)))]
        rows.append({"context": message, "reply": " ".join(base)})
    return rows


@pytest.fixture
def tiny_setup(tmp_path):
    """Hand-written pool + bootstrap pair for unit tests."""
    pool_texts = ["hello there", "see you later", "sounds good to me",
                  "not today sorry", "maybe tomorrow then"]
    pool = write_pool(tmp_path / "pool.jsonl", pool_texts)
    records = [
        {"message_id": i, "message": f"msg number {i} ok",
         "reply_ids": [i % 5, (i + 1) % 5, (i + 3) % 5],
         "replies": [pool_texts[i % 5], pool_texts[(i + 1) % 5], pool_texts[(i + 3) % 5]],
         "gains": [0.5, 0.6, 0.7], "ranks": [1, 2, 4]}
        for i in range(10)
    ]
    boot = write_jsonl(tmp_path / "boot.jsonl", records)
    vocab = build_vocabulary(pool, [r["message"] for r in records])
    return pool, boot, vocab, pool_texts, records
