import numpy as np
import pytest

from replyset import (
    DialoguePair,
    RetrievalIndex,
    assign_topics,
    build_candidate_pool,
    encode_pool,
    fit_encoder,
    matching_topk,
    mmr_select,
    read_predictions,
    top_n,
    topic_dedup_select,
    write_predictions,
)
from replyset.corpus import CorpusFormatError


def _cluster_fixture(dim=128, seed=3, n_per=6):
    rng = np.random.default_rng(seed)
    clusters = {
        0: ["apple", "fruit", "orchard", "cider"],
        1: ["engine", "motor", "piston", "diesel"],
        2: ["ocean", "wave", "tide", "surf"],
    }
    pairs = []
    i = 0
    for words in clusters.values():
        for _ in range(n_per):
            msg = " ".join(rng.choice(words, size=3))
            rep = " ".join(rng.choice(words, size=3))
            pairs.append(DialoguePair(i, msg, rep))
            i += 1
    pool = build_candidate_pool(pairs)
    enc = fit_encoder(pool, pairs, dim=dim, seed=seed)
    idx = RetrievalIndex(encode_pool(enc, pool), pool.lm_bias, beta=0.1)
    label = {}
    for rid, text in enumerate(pool.replies):
        for cid, words in clusters.items():
            if text.split()[0] in words:
                label[rid] = cid
    return pairs, pool, enc, idx, label


# ---------------------------------------------------------------- matching

def test_matching_k1_equals_top1(toy_pairs, toy_encoder, toy_pool):
    idx = RetrievalIndex(encode_pool(toy_encoder, toy_pool), toy_pool.lm_bias, beta=0.1)
    query = toy_encoder.encode("how are you ?")
    rs = matching_topk(idx, toy_pool, query, 1)
    assert rs.reply_ids == (top_n(idx, query, 1)[0].reply_id,)


def test_matching_is_myopic_on_clusters():
    pairs, pool, enc, idx, label = _cluster_fixture()
    query = enc.encode("apple orchard cider")
    rs = matching_topk(idx, pool, query, 3)
    assert len({label[r] for r in rs.reply_ids}) == 1


def test_matching_equal_scores_tie_break():
    idx = RetrievalIndex(np.ones((6, 4), dtype=np.float32), np.zeros(6), beta=0.0)
    pool = build_candidate_pool(
        [DialoguePair(i, "c", f"r {i}") for i in range(6)]
    )
    rs = matching_topk(idx, pool, np.ones(4, dtype=np.float32), 3)
    assert rs.reply_ids == (0, 1, 2)


def test_matching_gains_are_biased_scores(toy_pairs, toy_encoder, toy_pool):
    idx = RetrievalIndex(encode_pool(toy_encoder, toy_pool), toy_pool.lm_bias, beta=0.1)
    query = toy_encoder.encode("jazz music")
    rs = matching_topk(idx, toy_pool, query, 3)
    hits = top_n(idx, query, 3)
    assert rs.marginal_gains == tuple(h.score for h in hits)


# ---------------------------------------------------------------- MMR

def test_mmr_theta_one_equals_matching(toy_pairs, toy_encoder, toy_pool):
    idx = RetrievalIndex(encode_pool(toy_encoder, toy_pool), toy_pool.lm_bias, beta=0.1)
    for text in ("how are you ?", "jazz music", "lunch ?"):
        query = toy_encoder.encode(text)
        assert (
            mmr_select(idx, toy_pool, query, 3, theta=1.0).reply_ids
            == matching_topk(idx, toy_pool, query, 3).reply_ids
        )


def test_mmr_first_pick_is_top1(toy_pairs, toy_encoder, toy_pool):
    idx = RetrievalIndex(encode_pool(toy_encoder, toy_pool), toy_pool.lm_bias, beta=0.1)
    query = toy_encoder.encode("see you tomorrow")
    rs = mmr_select(idx, toy_pool, query, 3, theta=0.5)
    assert rs.reply_ids[0] == top_n(idx, query, 1)[0].reply_id


def test_mmr_identical_vectors_duplicate_wins_when_alternative_is_weak():
    # v0 == v1 exactly; v2 at 53 degrees. biased scores 1.0, 0.98, 0.4.
    # step 2: score(1) = .5*.98 - .5*1.0 = -0.01 beats
    #         score(2) = .5*0.4 - .5*0.6 = -0.10 -> the duplicate is kept.
    matrix = np.array([[1.0, 0.0], [1.0, 0.0], [0.6, 0.8]], dtype=np.float32)
    bias = np.array([0.0, -0.02, -0.2])
    idx = RetrievalIndex(matrix, bias, beta=1.0)
    pool = build_candidate_pool([DialoguePair(i, "c", f"r {i}") for i in range(3)])
    query = np.array([1.0, 0.0], dtype=np.float32)
    rs = mmr_select(idx, pool, query, 2, theta=0.5, n_shortlist=3)
    assert rs.reply_ids == (0, 1)
    assert rs.marginal_gains[1] == pytest.approx(-0.01, abs=1e-6)


def test_mmr_identical_vectors_duplicate_rejected_when_alternative_is_close():
    # same geometry but the duplicate's relevance drops to 0.7:
    # score(1) = .5*.7 - .5*1.0 = -0.15 now loses to score(2) = -0.10.
    matrix = np.array([[1.0, 0.0], [1.0, 0.0], [0.6, 0.8]], dtype=np.float32)
    bias = np.array([0.0, -0.3, -0.2])
    idx = RetrievalIndex(matrix, bias, beta=1.0)
    pool = build_candidate_pool([DialoguePair(i, "c", f"r {i}") for i in range(3)])
    query = np.array([1.0, 0.0], dtype=np.float32)
    rs = mmr_select(idx, pool, query, 2, theta=0.5, n_shortlist=3)
    assert rs.reply_ids == (0, 2)
    assert rs.marginal_gains[1] == pytest.approx(-0.10, abs=1e-6)


def test_mmr_prefers_duplicate_when_nothing_better():
    # with only duplicates available the second pick must still happen
    matrix = np.array([[1.0, 0.0], [1.0, 0.0]], dtype=np.float32)
    idx = RetrievalIndex(matrix, np.zeros(2), beta=0.0)
    pool = build_candidate_pool([DialoguePair(0, "c", "a"), DialoguePair(1, "c", "b")])
    rs = mmr_select(idx, pool, np.array([1.0, 0.0], dtype=np.float32), 2, theta=0.5)
    assert rs.reply_ids == (0, 1)


def test_mmr_theta_validation(toy_encoder, toy_pool):
    idx = RetrievalIndex(encode_pool(toy_encoder, toy_pool), toy_pool.lm_bias)
    with pytest.raises(ValueError):
        mmr_select(idx, toy_pool, toy_encoder.encode("x"), 2, theta=1.5)


# ---------------------------------------------------------------- topics

def test_assign_topics_recovers_separated_clusters():
    pairs, pool, enc, idx, label = _cluster_fixture()
    topics = assign_topics(idx.matrix, n_topics=3, seed=0)
    # same true cluster -> same topic, different -> different
    for a in range(len(pool)):
        for b in range(a + 1, len(pool)):
            same_true = label[a] == label[b]
            same_topic = topics.topic_of[a] == topics.topic_of[b]
            assert same_true == same_topic


def test_assign_topics_deterministic():
    pairs, pool, enc, idx, label = _cluster_fixture()
    a = assign_topics(idx.matrix, n_topics=3, seed=42)
    b = assign_topics(idx.matrix, n_topics=3, seed=42)
    np.testing.assert_array_equal(a.topic_of, b.topic_of)


def test_assign_topics_degenerate_one_per_reply():
    rng = np.random.default_rng(0)
    matrix = rng.normal(size=(5, 8)).astype(np.float32)
    topics = assign_topics(matrix, n_topics=5, seed=1)
    assert sorted(topics.topic_of.tolist()) == [0, 1, 2, 3, 4]


def test_assign_topics_validation():
    matrix = np.eye(3, dtype=np.float32)
    with pytest.raises(ValueError):
        assign_topics(matrix, n_topics=4)
    with pytest.raises(ValueError):
        assign_topics(matrix, n_topics=1)


# ---------------------------------------------------------------- topic dedup

def test_topic_dedup_spans_clusters():
    pairs, pool, enc, idx, label = _cluster_fixture()
    topics = assign_topics(idx.matrix, n_topics=3, seed=0)
    query = enc.encode("engine diesel motor")
    rs = topic_dedup_select(idx, pool, query, 3, topics, n_shortlist=len(pool))
    assert len({int(topics.topic_of[r]) for r in rs.reply_ids}) == 3
    assert rs.diagnostics == {"fallback": False}


def test_topic_dedup_fallback_when_single_topic():
    # every reply in the same topic: first pick by rank, rest from skipped in order
    matrix = np.ones((5, 4), dtype=np.float32)
    idx = RetrievalIndex(matrix, np.zeros(5), beta=0.0)
    pool = build_candidate_pool([DialoguePair(i, "c", f"r {i}") for i in range(5)])

    class OneTopic:
        topic_of = np.zeros(5, dtype=np.int64)
        n_topics = 3

    rs = topic_dedup_select(idx, pool, np.ones(4, dtype=np.float32), 3, OneTopic(), n_shortlist=5)
    assert rs.reply_ids == (0, 1, 2)
    assert rs.diagnostics == {"fallback": True}


def test_topic_dedup_equals_matching_when_topics_distinct():
    pairs, pool, enc, idx, label = _cluster_fixture()
    topics = assign_topics(idx.matrix, n_topics=len(pool), seed=0)
    query = enc.encode("ocean wave")
    assert (
        topic_dedup_select(idx, pool, query, 3, topics, n_shortlist=len(pool)).reply_ids
        == matching_topk(idx, pool, query, 3).reply_ids
    )


def test_all_selectors_return_distinct_ids(toy_pairs, toy_encoder, toy_pool):
    idx = RetrievalIndex(encode_pool(toy_encoder, toy_pool), toy_pool.lm_bias, beta=0.1)
    topics = assign_topics(idx.matrix, n_topics=4, seed=0)
    for text in ("how are you ?", "jazz", "drink ?"):
        query = toy_encoder.encode(text)
        for rs in (
            matching_topk(idx, toy_pool, query, 3),
            mmr_select(idx, toy_pool, query, 3),
            topic_dedup_select(idx, toy_pool, query, 3, topics),
        ):
            assert len(set(rs.reply_ids)) == 3


# ---------------------------------------------------------------- predictions IO

def test_predictions_round_trip(tmp_path):
    path = tmp_path / "preds.jsonl"
    rows = [(0, ["a", "b", "c"]), (1, ["d", "e", "f"])]
    write_predictions(rows, path, header={"_config": {"strategy": "matching"}})
    loaded = read_predictions(path)
    assert loaded == {0: ["a", "b", "c"], 1: ["d", "e", "f"]}


def test_predictions_duplicate_id_rejected(tmp_path):
    path = tmp_path / "preds.jsonl"
    write_predictions([(0, ["a"]), (0, ["b"])], path)
    with pytest.raises(CorpusFormatError, match="duplicate message_id 0"):
        read_predictions(path)
