import json

import pytest

from replyset import DialoguePair, build_candidate_pool, fit_encoder


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    return path


@pytest.fixture
def toy_pairs():
    texts = [
        ("hi , kenny . let's go for a drink .", "ok . let's get something to drink ."),
        ("of course ! let's go .", "let's go !"),
        ("how are you today ?", "i am good thanks for asking ."),
        ("do you like jazz music ?", "yes i love jazz music a lot ."),
        ("where are you from ?", "i am from new york city ."),
        ("what do you do for work ?", "i work as a teacher at a school ."),
        ("see you tomorrow then .", "see you tomorrow , good night ."),
        ("want to grab lunch ?", "sure , where do you want to eat ?"),
    ]
    return [DialoguePair(i, c, r) for i, (c, r) in enumerate(texts)]


@pytest.fixture
def toy_pool(toy_pairs):
    return build_candidate_pool(toy_pairs)


@pytest.fixture
def toy_encoder(toy_pool, toy_pairs):
    return fit_encoder(toy_pool, toy_pairs, dim=64, seed=7)
