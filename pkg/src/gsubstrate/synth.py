"""Seeded random graph generators for fuzzing and property checks."""

from __future__ import annotations

import random

from .graph import Entity, GraphState, Relation

PREDICATES = ("on", "near", "before", "causes", "bond")
LABELS = ("horse", "fence", "man", "C", "O", "N", "event", "node")

_NASTY_CHARS = 'ab Z9_-.,:()"{}=\\<>&;\'[]\té猫'
_NASTY_IDS = ("Entity", "has", "with", "is", "[relations]", "[entities]", "x.", ".", 'a"b',
              "{k=v}", "E1.", "&amp;", "<g>", "=", "relation", "to", "a.b.")
_ID_CHARS = "abcXYZ019_-.[]{}=\"<>&;'é"


def _nasty_text(rng: random.Random, max_len: int = 8, allow_empty: bool = True) -> str:
    n = rng.randint(0 if allow_empty else 1, max_len)
    return "".join(rng.choice(_NASTY_CHARS) for _ in range(n))


def _nasty_id(rng: random.Random) -> str:
    if rng.random() < 0.3:
        return rng.choice(_NASTY_IDS)
    return "".join(rng.choice(_ID_CHARS) for _ in range(rng.randint(1, 5)))


def random_graph(
    rng: random.Random,
    *,
    min_nodes: int = 1,
    max_nodes: int = 12,
    density: float | None = None,
    predicates: tuple[str, ...] = PREDICATES,
    nasty: bool = False,
    attrs: bool = False,
    weights: bool = False,
    self_loops: bool = True,
    graph_id: str | None = None,
) -> GraphState:
    """Draw a valid graph.

    Each ordered pair gets a relation with probability ``density`` (drawn
    uniformly when not given); a second predicate on the same pair appears now
    and then so parallel relations are exercised. ``nasty`` picks ids, labels
    and predicates from delimiter-heavy alphabets.
    """
    n = rng.randint(min_nodes, max_nodes)
    p = rng.random() * 0.6 if density is None else density
    ids: list[str] = []
    while len(ids) < n:
        cand = _nasty_id(rng) if nasty else f"E{len(ids)}"
        if cand not in ids:
            ids.append(cand)
    entities = []
    for eid in ids:
        if nasty:
            label = None if rng.random() < 0.2 else _nasty_text(rng)
        else:
            label = rng.choice(LABELS)
        eattrs = {}
        if attrs and rng.random() < 0.3:
            for _ in range(rng.randint(1, 3)):
                key = _nasty_text(rng, 4, allow_empty=False) if nasty else rng.choice("abcd")
                eattrs[key] = _nasty_text(rng, 5) if nasty else str(rng.randint(0, 9))
        entities.append(Entity(eid, label, eattrs))

    relations = []
    seen = set()
    for a in ids:
        for b in ids:
            threshold = p if a != b else (p * 0.2 if self_loops else 0.0)
            if rng.random() >= threshold:
                continue
            count = 2 if rng.random() < 0.1 else 1
            for _ in range(count):
                pred = _nasty_text(rng, 6, allow_empty=False) if nasty else rng.choice(predicates)
                if (a, pred, b) in seen:
                    continue
                seen.add((a, pred, b))
                rattrs = {}
                if weights:
                    rattrs["weight"] = rng.choice(("0", "1", "2", "0.5", "1.25", "3", "10", "2.75"))
                if attrs and rng.random() < 0.3:
                    key = _nasty_text(rng, 4, allow_empty=False) if nasty else "conf"
                    if key != "weight":
                        rattrs[key] = _nasty_text(rng, 5) if nasty else str(rng.randint(0, 9))
                relations.append(Relation(a, pred, b, rattrs))
    rng.shuffle(entities)
    rng.shuffle(relations)
    return GraphState(tuple(entities), tuple(relations), graph_id)


def random_bipartite_graph(
    rng: random.Random, *, max_nodes: int = 12, density: float | None = None, part_attrs: bool = False
) -> GraphState:
    """Draw a graph whose undirected view is bipartite (edges only across sides)."""
    n = rng.randint(2, max_nodes)
    left_n = rng.randint(1, n - 1)
    p = rng.random() * 0.8 if density is None else density
    ids = [f"L{i}" for i in range(left_n)] + [f"R{i}" for i in range(n - left_n)]
    entities = [
        Entity(eid, "node", {"part": eid[0]} if part_attrs else {}) for eid in ids
    ]
    relations = []
    for a in ids[:left_n]:
        for b in ids[left_n:]:
            if rng.random() < p:
                relations.append(Relation(a, "links", b) if rng.random() < 0.5 else Relation(b, "links", a))
    rng.shuffle(relations)
    return GraphState(tuple(entities), tuple(relations))


def random_corpus(rng: random.Random, per_domain: int = 5, *, domains=None, max_nodes: int = 8):
    """Small corpus of records covering each domain with a matching source."""
    from .corpus import DOMAINS, CorpusRecord, Source

    records = []
    for domain in domains or DOMAINS:
        for i in range(per_domain):
            rid = f"{domain}-{i}"
            g = random_graph(rng, min_nodes=2, max_nodes=max_nodes, weights=domain == "algorithm",
                             self_loops=False, graph_id=rid)
            source, target = None, None
            if domain == "scene":
                source = Source("image_ref", f"images/{rid}.jpg")
            elif domain == "event":
                words = " ".join(e.label or e.id for e in g.entities)
                source = Source("text", f"Report {i}: {words}.")
            elif domain == "molecule":
                source = Source("smiles", "C" * len(g.entities))
                target = f"A molecule with {len(g.entities)} atoms."
            records.append(CorpusRecord(rid, domain, g, source, target))
    return records
