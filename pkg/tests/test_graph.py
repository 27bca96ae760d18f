from fractions import Fraction

import pytest

from gsubstrate.errors import InvalidGraphError, SchemaSyntaxError, UnknownNodeError
from gsubstrate.graph import (
    Entity,
    GraphState,
    Relation,
    degree,
    directed_simple_edges,
    is_valid_id,
    parse_weight,
    require_valid,
    structural_equal,
    undirected_simple_view,
    validate,
)


def G(ids, rels, labels=None):
    labels = labels or {}
    return GraphState(tuple(Entity(i, labels.get(i)) for i in ids), tuple(Relation(*r) for r in rels))


def messages(g):
    return [v.message for v in validate(g)]


def test_single_entity_is_valid():
    assert validate(G(["E1"], [])) == []


def test_duplicate_entity_reported():
    assert "duplicate entity id E1" in messages(G(["E1", "E1"], []))


def test_dangling_object_reported():
    assert messages(G(["E1"], [("E1", "on", "E2")])) == ["dangling object E2"]


def test_duplicate_triple_and_bad_weight():
    g = GraphState(
        (Entity("A"), Entity("B")),
        (Relation("A", "r", "B"), Relation("A", "r", "B"), Relation("B", "s", "A", {"weight": "-1"})),
    )
    rules = [v.rule for v in validate(g)]
    assert "duplicate-relation" in rules
    assert "weight" in rules
    with pytest.raises(InvalidGraphError) as err:
        require_valid(g)
    assert err.value.code == "invalid-graph"


@pytest.mark.parametrize("value,ok", [("E1", True), ("a.b-c_é", True), ("", False), ("a b", False),
                                      ("a,b", False), ("f(x)", False), ("k:v", False), ("\t", False)])
def test_id_rule(value, ok):
    assert is_valid_id(value) is ok


def test_parse_weight_exact():
    assert parse_weight("1.25") == Fraction(5, 4)
    assert parse_weight("2e1") == 20
    for bad in ("-1", "nan", "inf", "1,5", ""):
        with pytest.raises(ValueError):
            parse_weight(bad)


def test_view_collapses_reciprocal_pair():
    v = undirected_simple_view(G(["A", "B"], [("A", "r", "B"), ("B", "r", "A")]))
    assert v.edges == {frozenset("AB")}


def test_view_drops_self_loop():
    assert undirected_simple_view(G(["A"], [("A", "r", "A")])).edges == frozenset()


def test_triangle_has_three_edges():
    tri = G("ABC", [("A", "r", "B"), ("B", "r", "C"), ("C", "r", "A")])
    assert len(undirected_simple_view(tri).edges) == 3


def test_degrees():
    star = G(["c", "x", "y", "z", "lone"], [("c", "r", "x"), ("c", "r", "y"), ("z", "r", "c")])
    v = undirected_simple_view(star)
    assert degree(v, "c") == 3
    assert degree(v, "lone") == 0
    path = undirected_simple_view(G("ABC", [("A", "r", "B"), ("B", "r", "C")]))
    assert degree(path, "B") == 2
    with pytest.raises(UnknownNodeError):
        degree(v, "nope")


def test_directed_edges_keep_loops_and_collapse_predicates():
    g = G("AB", [("A", "r", "B"), ("A", "s", "B"), ("B", "r", "B")])
    assert directed_simple_edges(g) == {("A", "B"), ("B", "B")}


def test_structural_equal_cases():
    g = G("ABC", [("A", "r", "B"), ("B", "s", "C")], {"A": "x"})
    assert structural_equal(g, GraphState(g.entities, tuple(reversed(g.relations))))
    assert not structural_equal(g, g.with_relations(g.relations + (Relation("C", "r", "A"),)))
    relabeled = GraphState((Entity("A", "y"),) + g.entities[1:], g.relations)
    assert not structural_equal(g, relabeled)
    assert structural_equal(g, GraphState(g.entities, g.relations, "other-id"))


def test_dict_round_trip_and_order():
    g = GraphState(
        (Entity("b", "B", {"z": "1", "a": "2"}), Entity("a")),
        (Relation("b", "r", "a", {"weight": "2"}), Relation("a", "r", "b")),
        "g1",
    )
    d = g.to_dict()
    assert list(d) == ["graph_id", "entities", "relations"]
    assert [e["id"] for e in d["entities"]] == ["a", "b"]
    assert list(d["entities"][1]["attrs"]) == ["a", "z"]
    assert GraphState.from_dict(d).to_dict() == d


def test_from_dict_reports_path():
    with pytest.raises(SchemaSyntaxError) as err:
        GraphState.from_dict({"entities": [{"id": "a"}], "relations": [{"subject": "a", "predicate": 3}]})
    assert "$.relations[0]" in str(err.value)
