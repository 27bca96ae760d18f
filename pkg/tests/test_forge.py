import random
from collections import Counter

import pytest

from gsubstrate.corpus import CorpusRecord, Source
from gsubstrate.errors import (
    EmptyDescriptionError,
    NoComponentLargeEnoughError,
    NotBipartiteError,
    NoValidNegativeError,
    NoValidPerturbationError,
    PreconditionError,
)
from gsubstrate.forge import (
    PERTURB_OPS,
    PerturbationDescriptor,
    TaskInstance,
    apply_perturbation,
    contains_subgraph,
    derive_seed,
    extract_graph_block,
    gar_query,
    instance_from_record,
    make_consistency_instance,
    make_description_instance,
    make_gar_instance,
    make_generation_instance,
    make_subgraph_instance,
    perturb,
    perturb_any,
    sample_connected_subgraph,
)
from gsubstrate.graph import Entity, GraphState, Relation, structural_equal, validate
from gsubstrate.schema_io import parse
from gsubstrate.synth import random_graph


def G(ids, rels, labels=None):
    labels = labels or {}
    return GraphState(tuple(Entity(i, labels.get(i)) for i in ids), tuple(Relation(*r) for r in rels))


TRIANGLE = G("ABC", [("A", "r", "B"), ("B", "s", "C"), ("C", "t", "A")], {"A": "x", "B": "y", "C": "z"})
PATH = G("ABC", [("A", "r", "B"), ("B", "r", "C")])
SCENE = G(["E1", "E2", "E3"], [("E1", "on", "E2"), ("E3", "near", "E1")], {"E1": "horse", "E2": "fence", "E3": "man"})


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(1, "a", 2) == derive_seed(1, "a", 2)
    assert derive_seed(1, "a", 2) != derive_seed(1, "a", 3)


def test_forced_rewire():
    g = G(["E1", "E2", "E3"], [("E1", "on", "E2")])
    for seed in range(5):
        out, desc = perturb(g, "endpoint-rewire", seed)
        assert out.triples == [("E1", "on", "E3")]
        assert desc.touched == ((("E1", "on", "E2"), ("E1", "on", "E3")),)


@pytest.mark.parametrize("op", PERTURB_OPS)
def test_two_entity_graph_has_no_valid_move(op):
    with pytest.raises(NoValidPerturbationError):
        perturb(G(["E1", "E2"], [("E1", "on", "E2")]), op, 0)


def test_no_relations_is_a_precondition_error():
    with pytest.raises(PreconditionError):
        perturb(G("AB", []), "edge-swap", 0)


def test_triangle_swap_touches_two_triples():
    for seed in range(30):
        out, desc = perturb(TRIANGLE, "edge-swap", seed)
        assert len(set(out.triples) - set(TRIANGLE.triples)) == 2
        assert Counter(r.predicate for r in out.relations) == Counter(r.predicate for r in TRIANGLE.relations)
        assert len(desc.touched) == 2


def test_descriptor_replays_and_round_trips():
    rng = random.Random(2)
    for i in range(100):
        g = random_graph(rng, min_nodes=3)
        if not g.relations:
            continue
        try:
            out, desc = perturb_any(g, i)
        except NoValidPerturbationError:
            continue
        again = PerturbationDescriptor.from_json(desc.to_json())
        assert structural_equal(apply_perturbation(g, again), out)
        assert out.entities == g.entities
        assert validate(out) == []
        assert not structural_equal(out, g)


def test_generation_instances():
    ere = make_generation_instance(Source("text", "The horse stood by the fence."), SCENE, "natural-language")
    assert (ere.task, ere.role, ere.provenance["trajectory_step"]) == ("ere", "generate", 0)
    assert structural_equal(parse(ere.gold, "natural-language"), SCENE)
    sgg = make_generation_instance(Source("image_ref", "img/1.jpg"), SCENE, "xml-style")
    assert sgg.task == "sgg" and sgg.input_refs == ["img/1.jpg"]
    empty = make_generation_instance(Source("text", "nothing"), G(["E1"], []), "unified-text")
    assert empty.gold.endswith("[relations]\n")


def test_description_instance():
    mol = G(["A1", "A2"], [("A1", "single", "A2")], {"A1": "C", "A2": "O"})
    inst = make_description_instance(mol, "CO", "Methanol.", "unified-text")
    assert inst.task == "mgd" and "SMILES: CO" in inst.input_text
    with pytest.raises(EmptyDescriptionError):
        make_description_instance(mol, None, "  ", "unified-text")


def test_gar_instances():
    for seed in range(5):
        assert make_gar_instance(TRIANGLE, "connectivity", seed, "unified-text").gold["answer"] is True
    # seed 1 draws the pair (A, C)
    q = gar_query(PATH, "shortest-path", 1)
    assert (q.source, q.target) == ("A", "C")
    inst = make_gar_instance(PATH, "shortest-path", 1, "unified-text")
    assert inst.gold["length"] == 2 and inst.gold["path"] == ["A", "B", "C"]
    with pytest.raises(NotBipartiteError):
        make_gar_instance(TRIANGLE, "matching", 0, "unified-text")


def test_consistency_instances():
    src = Source("image_ref", "img/1.jpg")
    pos = make_consistency_instance(src, SCENE, True, 0, "unified-text")
    assert pos.gold is True and pos.provenance["perturbation_applied"] is None
    assert structural_equal(parse(extract_graph_block(pos.input_text, "candidate graph"), "unified-text"), SCENE)
    neg = make_consistency_instance(src, SCENE, False, 4, "unified-text")
    cand = parse(extract_graph_block(neg.input_text, "candidate graph"), "unified-text")
    assert neg.gold is False and not structural_equal(cand, SCENE)
    desc = PerturbationDescriptor.from_json(neg.provenance["perturbation_applied"])
    assert structural_equal(apply_perturbation(SCENE, desc), cand)
    with pytest.raises(NoValidPerturbationError):
        make_consistency_instance(src, G(["E1", "E2"], [("E1", "on", "E2")]), False, 0, "unified-text")


def test_sample_connected_subgraph():
    assert structural_equal(sample_connected_subgraph(TRIANGLE, 3, 0), TRIANGLE)
    seen = set()
    for seed in range(40):
        sub = sample_connected_subgraph(TRIANGLE, 2, seed)
        assert len(sub.entities) == 2 and len(sub.relations) == 1
        seen.add(frozenset(sub.entity_ids))
    assert len(seen) == 3
    with pytest.raises(NoComponentLargeEnoughError):
        sample_connected_subgraph(G("ABC", []), 2, 0)


def test_contains_subgraph():
    sub = sample_connected_subgraph(TRIANGLE, 2, 1)
    assert contains_subgraph(TRIANGLE, sub)
    extra = sub.with_relations(sub.relations + (Relation(sub.entity_ids[0], "new", sub.entity_ids[1]),))
    assert not contains_subgraph(TRIANGLE, extra)
    relabeled = GraphState((Entity(sub.entity_ids[0], "other"),) + sub.entities[1:], sub.relations)
    assert not contains_subgraph(TRIANGLE, relabeled)


def test_subgraph_instances():
    rng = random.Random(4)
    for i in range(60):
        g = random_graph(rng, min_nodes=4, density=0.5)
        for positive in (True, False):
            try:
                inst = make_subgraph_instance(g, 3, positive, i, "natural-language")
            except (NoComponentLargeEnoughError, NoValidNegativeError):
                continue
            query = parse(extract_graph_block(inst.input_text, "query subgraph"), "natural-language")
            assert contains_subgraph(g, query) is positive
    with pytest.raises(NoComponentLargeEnoughError):
        make_subgraph_instance(PATH, 4, True, 0, "unified-text")


def test_instance_json_and_ids_deterministic():
    rec = CorpusRecord("r1", "event", SCENE, Source("text", "t"))
    a = instance_from_record(rec, "unified-text", 3)
    b = instance_from_record(rec, "unified-text", 3)
    assert a == b and a.instance_id == "ere:r1"
    assert TaskInstance.from_json(a.to_json()) == a
    assert list(a.to_json()) == ["instance_id", "task", "role", "realization", "input_text",
                                 "input_refs", "gold", "provenance"]
