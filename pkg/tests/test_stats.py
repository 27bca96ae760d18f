import random
from fractions import Fraction

import pytest

from gsubstrate.errors import EmptyCorpusError, EmptyGraphError
from gsubstrate.graph import Entity, GraphState, Relation
from gsubstrate.stats import corpus_stats, count_two_hop, extract_hubs, extract_two_hop_chains, graph_stats
from gsubstrate.synth import random_graph

from _oracles import stats_oracle


def G(ids, rels):
    return GraphState(tuple(Entity(i) for i in ids), tuple(Relation(s, p, o) for s, p, o in rels))


TRIANGLE = G("ABC", [("A", "r", "B"), ("B", "r", "C"), ("C", "r", "A")])
PATH = G("ABC", [("A", "r", "B"), ("B", "r", "C")])
STAR = G(["c", "L1", "L2", "L3"], [("c", "r", "L1"), ("c", "r", "L2"), ("c", "r", "L3")])


@pytest.mark.parametrize("g,expected", [
    (TRIANGLE, (2.0, 1.0, 3, 0)),
    (PATH, (4 / 3, 4 / 3, 1, 0)),
    (STAR, (1.5, 1.5, 0, 1)),
])
def test_hand_fixtures(g, expected):
    rec = graph_stats(g)
    assert (rec.avg_deg, rec.aspl, rec.two_hop, rec.star) == expected
    avg, aspl, two_hop, star = stats_oracle(g)
    assert (float(avg), float(aspl), two_hop, star) == expected


def test_aspl_undefined_without_connected_pairs():
    assert graph_stats(G("AB", [])).aspl is None
    assert graph_stats(G("A", [("A", "r", "A")])).aspl is None


def test_empty_graph_and_corpus():
    with pytest.raises(EmptyGraphError):
        graph_stats(GraphState())
    with pytest.raises(EmptyCorpusError):
        corpus_stats([])


def test_corpus_means():
    one = corpus_stats([TRIANGLE])
    rec = graph_stats(TRIANGLE)
    assert (one.avg_deg, one.aspl, one.two_hop, one.star) == (rec.avg_deg, rec.aspl, rec.two_hop, rec.star)
    assert corpus_stats([PATH, PATH]).to_dict() | {"graph_count": 1, "aspl_defined_count": 1} == \
        corpus_stats([PATH]).to_dict()
    mixed = corpus_stats([PATH, G("AB", [])])
    assert mixed.aspl == pytest.approx(4 / 3)
    assert mixed.aspl_defined_count == 1


def test_two_hop_counts_collapse_parallel_predicates():
    g = G("ABC", [("A", "r", "B"), ("A", "s", "B"), ("B", "r", "C")])
    assert count_two_hop(g) == 1
    assert count_two_hop(g, "relation-pairs") == 2
    with pytest.raises(ValueError):
        count_two_hop(g, "bogus")


def test_chains():
    assert [(c.a, c.b, c.c) for c in extract_two_hop_chains(PATH)] == [("A", "B", "C")]
    assert len(extract_two_hop_chains(TRIANGLE)) == 3
    assert extract_two_hop_chains(G("AB", [])) == []
    chain = extract_two_hop_chains(G("ABC", [("A", "z", "B"), ("A", "a", "B"), ("B", "r", "C")]))[0]
    assert chain.first.predicate == "a"


def test_hubs():
    hubs = extract_hubs(STAR)
    assert [(h.center, h.degree) for h in hubs] == [("c", 3)]
    assert extract_hubs(TRIANGLE) == []
    fused = G(["h1", "h2", "a", "b", "c", "d", "shared"],
              [("h1", "r", "a"), ("h1", "r", "b"), ("h1", "r", "shared"),
               ("h2", "r", "c"), ("h2", "r", "d"), ("h2", "r", "shared")])
    assert [h.center for h in extract_hubs(fused)] == ["h1", "h2"]


@pytest.mark.parametrize("mode", ["node-triples", "relation-pairs"])
def test_matches_oracle_on_random_graphs(mode):
    rng = random.Random(11)
    for _ in range(400):
        g = random_graph(rng)
        rec = graph_stats(g, mode)
        avg, aspl, two_hop, star = stats_oracle(g, mode)
        assert Fraction(rec.avg_deg).limit_denominator(1000) == avg
        assert (rec.aspl is None) == (aspl is None)
        if aspl is not None:
            assert abs(rec.aspl - float(aspl)) <= 1e-12
        assert (rec.two_hop, rec.star) == (two_hop, star)
