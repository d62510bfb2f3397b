import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from replyset import (
    CorpusFormatError,
    DialoguePair,
    build_candidate_pool,
    compute_lm_bias,
    load_dialogue_corpus,
    load_pool,
    normalize_and_tokenize,
    save_pool,
)
from conftest import write_jsonl


# ---------------------------------------------------------------- loading

def test_load_identity_passthrough(tmp_path):
    path = write_jsonl(tmp_path / "c.jsonl", [{"context": "hi", "reply": "hello"}])
    pairs = load_dialogue_corpus(path)
    assert len(pairs) == 1
    assert pairs[0].context == "hi"
    assert pairs[0].reply == "hello"
    assert pairs[0].message_id == 0


def test_load_persona_concatenation(tmp_path):
    row = {
        "context": "i was but am now divorced",
        "reply": "oh i am sorry to hear that",
        "persona": ["i like jazz music."],
    }
    path = write_jsonl(tmp_path / "c.jsonl", [row])
    with_persona = load_dialogue_corpus(path, persona_mode=True)
    assert with_persona[0].context == "i like jazz music. i was but am now divorced"
    without = load_dialogue_corpus(path, persona_mode=False)
    assert without[0].context == "i was but am now divorced"


def test_load_multi_sentence_persona(tmp_path):
    row = {"context": "msg", "reply": "rep", "persona": ["a b.", "c d."]}
    path = write_jsonl(tmp_path / "c.jsonl", [row])
    pairs = load_dialogue_corpus(path, persona_mode=True)
    assert pairs[0].context == "a b. c d. msg"


def test_load_large_file_preserves_count_and_order(tmp_path):
    rows = [{"context": f"message {i}", "reply": f"reply {i}"} for i in range(50_000)]
    path = write_jsonl(tmp_path / "big.jsonl", rows)
    pairs = load_dialogue_corpus(path)
    assert len(pairs) == 50_000
    assert [p.message_id for p in pairs[:3]] == [0, 1, 2]
    assert pairs[-1].reply == "reply 49999"


def test_load_malformed_line_names_line_number(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text('{"context": "a", "reply": "b"}\n{oops\n', encoding="utf-8")
    with pytest.raises(CorpusFormatError, match="line 2"):
        load_dialogue_corpus(path)


def test_load_missing_field_names_field(tmp_path):
    path = write_jsonl(tmp_path / "c.jsonl", [{"context": "a"}])
    with pytest.raises(CorpusFormatError, match="'reply'"):
        load_dialogue_corpus(path)


def test_load_empty_field_rejected(tmp_path):
    path = write_jsonl(tmp_path / "c.jsonl", [{"context": "   ", "reply": "b"}])
    with pytest.raises(CorpusFormatError, match="'context'"):
        load_dialogue_corpus(path)


def test_load_bad_persona_rejected(tmp_path):
    path = write_jsonl(tmp_path / "c.jsonl", [{"context": "a", "reply": "b", "persona": "x"}])
    with pytest.raises(CorpusFormatError, match="'persona'"):
        load_dialogue_corpus(path)


# ---------------------------------------------------------------- tokenization

def test_tokenize_keeps_spaced_punctuation():
    assert normalize_and_tokenize("Let's go !") == ["let's", "go", "!"]


def test_tokenize_empty():
    assert normalize_and_tokenize("") == []


def test_tokenize_whitespace_collapse():
    assert normalize_and_tokenize("  A  B ") == ["a", "b"]


@given(st.text(max_size=80))
def test_tokenize_is_pure_and_never_empty_tokens(text):
    first = normalize_and_tokenize(text)
    second = normalize_and_tokenize(text)
    assert first == second
    assert all(t for t in first)
    assert all(t == t.lower() for t in first)


# ---------------------------------------------------------------- pool

def test_pool_dedup_first_occurrence_order():
    pairs = [DialoguePair(i, "c", r) for i, r in enumerate(["ok", "ok", "hi"])]
    pool = build_candidate_pool(pairs)
    assert pool.replies == ("ok", "hi")


def test_pool_dedup_is_normalized():
    pairs = [DialoguePair(i, "c", r) for i, r in enumerate(["OK  then", "ok then", "hi"])]
    pool = build_candidate_pool(pairs)
    assert pool.replies == ("ok then", "hi")


def test_pool_empty_pairs_error():
    with pytest.raises(ValueError):
        build_candidate_pool([])


def test_pool_idempotent_rebuild():
    pairs = [DialoguePair(i, "c", r) for i, r in enumerate(["a b", "a b", "b c", "c"])]
    first = build_candidate_pool(pairs)

    def replay(pool):
        return [DialoguePair(i, "-", r) for i, r in enumerate(pool.replies)]

    second = build_candidate_pool(replay(first))
    third = build_candidate_pool(replay(second))
    assert second.replies == third.replies
    assert second.token_cache == third.token_cache
    np.testing.assert_array_equal(second.lm_bias, third.lm_bias)


# ---------------------------------------------------------------- LM bias

def test_lm_bias_hand_computed_two_token_reply():
    # reply side is "a a a" + "b": counts a=3, b=1, total=4, vocab=2
    counts = {"a": 3, "b": 1}
    expected = (math.log((3 + 1) / (4 + 2)) + math.log((1 + 1) / (4 + 2))) / 2
    got = compute_lm_bias([("a", "b")], counts)
    assert got[0] == pytest.approx(expected, abs=1e-12)
    assert got[0] == pytest.approx(-0.7520386983881371, abs=1e-10)


def test_lm_bias_hand_computed_single_token():
    counts = {"a": 3, "b": 1}
    got = compute_lm_bias([("a",)], counts)
    assert got[0] == pytest.approx(math.log(2 / 3), abs=1e-12)


def test_lm_bias_via_pool_build():
    pairs = [DialoguePair(0, "c", "a a a"), DialoguePair(1, "c", "b")]
    pool = build_candidate_pool(pairs)
    assert pool.replies == ("a a a", "b")
    assert pool.lm_bias[1] == pytest.approx(math.log(2 / 6), abs=1e-12)


@given(
    st.lists(st.sampled_from(["a", "b", "c", "d"]), min_size=1, max_size=6),
    st.dictionaries(st.sampled_from(["a", "b", "c", "d", "e"]), st.integers(1, 9), min_size=1),
)
def test_lm_bias_never_positive(tokens, counts):
    assert compute_lm_bias([tuple(tokens)], counts)[0] <= 0.0


def test_lm_bias_appending_rare_token_decreases_value():
    rng = np.random.default_rng(4)
    vocab = [f"w{i}" for i in range(20)]
    for _ in range(50):
        counts = {w: int(rng.integers(1, 50)) for w in vocab}
        tokens = tuple(rng.choice(vocab, size=int(rng.integers(1, 8))))
        base = compute_lm_bias([tokens], counts)[0]
        total = sum(counts.values())
        denom = total + len(counts)
        # any token whose smoothed log-probability is below the current mean
        rare = [w for w in vocab if math.log((counts[w] + 1) / denom) < base]
        if not rare:
            continue
        extended = compute_lm_bias([tokens + (rare[0],)], counts)[0]
        assert extended < base


def test_lm_bias_zero_token_reply_flagged():
    pairs = [DialoguePair(0, "c", "a a"), DialoguePair(1, "c", "b"), DialoguePair(2, "c", " ")]
    pool = build_candidate_pool(pairs)
    assert pool.replies[-1] == ""
    assert pool.zero_token_replies == (2,)
    finite = [pool.lm_bias[0], pool.lm_bias[1]]
    assert pool.lm_bias[2] == min(finite)
    assert np.all(np.isfinite(pool.lm_bias))


# ---------------------------------------------------------------- pool file IO

def test_pool_save_load_round_trip(tmp_path, toy_pool):
    path = tmp_path / "pool.jsonl"
    save_pool(toy_pool, path, header={"_config": {"command": "ingest"}})
    loaded = load_pool(path)
    assert loaded.replies == toy_pool.replies
    np.testing.assert_array_equal(loaded.lm_bias, toy_pool.lm_bias)
    assert loaded.token_cache == toy_pool.token_cache


def test_pool_file_schema(tmp_path, toy_pool):
    path = tmp_path / "pool.jsonl"
    save_pool(toy_pool, path)
    rows = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]
    assert [r["reply_id"] for r in rows] == list(range(len(toy_pool)))
    assert set(rows[0]) == {"reply_id", "text", "lm_bias"}


def test_pool_load_rejects_out_of_order(tmp_path):
    path = tmp_path / "pool.jsonl"
    path.write_text(
        '{"reply_id": 1, "text": "a", "lm_bias": -1.0}\n', encoding="utf-8"
    )
    with pytest.raises(CorpusFormatError, match="out of order"):
        load_pool(path)
