import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gsubstrate.errors import EmptyCandidateCorpusError, EmptyGoldCorpusError
from gsubstrate.metrics import (
    UNPARSEABLE,
    accuracy,
    bleu4,
    corpus_recall,
    lcs_length,
    mean_recall_at_k,
    normalize_answer,
    normalize_triple,
    rank_scored,
    recall_at_k,
    rouge_l,
    rouge_l_corpus,
    tokenize,
    triple_prf,
)


def test_tokenizer():
    assert tokenize("The C=O bond, isn't it?") == ["the", "c", "=", "o", "bond", ",", "isn", "'", "t", "it", "?"]


@pytest.mark.parametrize("text,kind,expected", [
    ("I think the answer is Yes.", "connectivity", True),
    ("no... wait, TRUE", "cycle", True),
    ("lengths 3 then finally 2", "shortest-path", Fraction(2)),
    ("no idea", "shortest-path", UNPARSEABLE),
    ("from E1 to E4 the cost is 2.75", "shortest-path", Fraction(11, 4)),
    ("2? no, it is unreachable", "shortest-path", None),
    ("size 3", "matching", Fraction(3)),
    ("the graph is inconsistent", "cc", False),
    ("absent", "sr", False),
])
def test_normalize_answer(text, kind, expected):
    assert normalize_answer(text, kind) == expected or normalize_answer(text, kind) is expected


def test_accuracy_counts():
    golds = {"a": True, "b": False, "c": True, "d": False}
    assert accuracy({"a": "yes", "b": "no", "c": "yes", "d": "no"}, golds, "connectivity") == 1.0
    assert accuracy({"a": "no", "b": "yes", "c": "no", "d": "yes"}, golds, "connectivity") == 0.0
    assert accuracy({"a": "yes", "b": "no", "c": "yes"}, golds, "connectivity") == 0.75
    assert accuracy({"x": "0.3333331"}, {"x": 1 / 3}, "shortest-path", tolerance=1e-6) == 1.0
    assert accuracy({"x": "0.33"}, {"x": 1 / 3}, "shortest-path", tolerance=1e-6) == 0.0
    with pytest.raises(EmptyGoldCorpusError):
        accuracy({}, {}, "cycle")


def test_triple_prf_fixtures():
    t1, t2, t3 = ("a", "r", "b"), ("b", "r", "c"), ("c", "r", "a")
    assert triple_prf({t1, t2}, {t1, t2}) == (1.0, 1.0, 1.0)
    assert triple_prf({t1, t2}, {t1, t3}) == (0.5, 0.5, 0.5)
    assert triple_prf(set(), {t1}) == (0.0, 0.0, 0.0)
    assert triple_prf(set(), set()) == (1.0, 1.0, 1.0)
    assert triple_prf({t1}, set()) == (0.0, 0.0, 0.0)


def test_triple_normalization():
    assert normalize_triple(("  The  Horse", "ON", "fence ")) == ("the horse", "on", "fence")
    assert normalize_triple(("b", "near", "a"), symmetric=True) == ("a", "near", "b")


def test_recall_fixtures():
    gold = {("a", "r", "b"), ("c", "s", "d")}
    assert recall_at_k([("a", "r", "b"), ("c", "s", "d"), ("x", "y", "z")], gold, 2) == 1.0
    assert recall_at_k([("a", "r", "b"), ("x", "y", "z"), ("c", "s", "d")], gold, 2) == 0.5
    assert mean_recall_at_k([("a", "r", "b")], gold, 5) == 0.5
    assert recall_at_k([], set(), 3) is None
    assert corpus_recall([1.0, None, 0.5]) == 0.75
    with pytest.raises(EmptyGoldCorpusError):
        corpus_recall([None])


def test_rank_scored_is_stable():
    rows = [("a", "r", "b", 0.5), ("c", "r", "d", 0.9), ("e", "r", "f", 0.5)]
    assert rank_scored(rows) == [("c", "r", "d"), ("a", "r", "b"), ("e", "r", "f")]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.sampled_from("pq"), st.integers(0, 4)), max_size=12),
       st.sets(st.tuples(st.integers(0, 4), st.sampled_from("pq"), st.integers(0, 4)), min_size=1, max_size=6))
def test_recall_monotone_in_k(ranked, gold):
    prev_r = prev_m = 0.0
    for k in range(1, len(ranked) + 2):
        r, m = recall_at_k(ranked, gold, k), mean_recall_at_k(ranked, gold, k)
        assert r >= prev_r and m >= prev_m
        prev_r, prev_m = r, m


@settings(max_examples=200, deadline=None)
@given(st.sets(st.integers(0, 9), max_size=6), st.sets(st.integers(0, 9), max_size=6))
def test_prf_equal_sizes(pred, gold):
    p, r, f = triple_prf(pred, gold)
    if len(pred) == len(gold):
        assert p == r == pytest.approx(f)
    assert 0 <= f <= 1


def test_bleu_fixtures():
    cand, ref = tokenize("the cat sat on the mat"), tokenize("the cat is on the mat")
    assert bleu4([cand], [ref]) == 0.0
    # add-one smoothing for n >= 2: 5/6, 4/6, 2/5, 1/4, equal lengths
    assert bleu4([cand], [ref], mode="sentence", smoothing=True) == pytest.approx((1 / 18) ** 0.25, abs=1e-12)
    same = tokenize("a small organic molecule")
    assert bleu4([same], [same]) == 1.0
    assert bleu4([["a", "b", "c"]], [["a", "b", "c"]]) == 0.0
    assert bleu4([["x", "y", "z", "w"]], [["a", "b", "c", "d"]]) == 0.0
    with pytest.raises(EmptyCandidateCorpusError):
        bleu4([], [])


def test_bleu_brevity_penalty_and_multi_reference():
    cand = "a b c d e".split()
    ref = "a b c d e f g h i j".split()
    assert bleu4([cand], [ref]) == pytest.approx(math.exp(1 - 10 / 5))
    assert bleu4([cand], [[ref, cand]]) == 1.0


def test_bleu_corpus_is_order_invariant():
    rng = random.Random(0)
    vocab = list("abcdef")
    pairs = [([rng.choice(vocab) for _ in range(8)], [rng.choice(vocab) for _ in range(8)]) for _ in range(20)]
    a = bleu4([c for c, _ in pairs], [r for _, r in pairs])
    rng.shuffle(pairs)
    assert bleu4([c for c, _ in pairs], [r for _, r in pairs]) == pytest.approx(a, abs=1e-15)


def test_rouge_fixtures():
    assert rouge_l("a b c".split(), "a b c".split()) == 1.0
    assert rouge_l("a b c".split(), "a x c".split()) == pytest.approx(2 / 3, abs=1e-12)
    assert rouge_l("a b".split(), "c d".split()) == 0.0
    assert rouge_l([], ["a"]) == 0.0
    assert lcs_length("abcbdab", "bdcaba") == 4
    # recall-weighted variant
    val = rouge_l("a b".split(), "a b c d".split(), beta=2.0)
    p, r = 1.0, 0.5
    assert val == pytest.approx(5 * p * r / (r + 4 * p))
    assert rouge_l_corpus([["a"], ["b"]], [["a"], ["c"]]) == 0.5
