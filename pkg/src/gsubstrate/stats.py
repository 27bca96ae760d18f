"""Per-graph topology statistics and local motif extraction."""

from __future__ import annotations

from collections import deque
from collections.abc import Iterable
from dataclasses import dataclass

from .errors import EmptyCorpusError, EmptyGraphError
from .graph import GraphState, Relation, require_valid, undirected_simple_view

HUB_MIN_DEGREE = 3
COUNT_MODES = ("node-triples", "relation-pairs")


@dataclass(frozen=True)
class StatRecord:
    graph_id: str | None
    avg_deg: float
    aspl: float | None
    two_hop: int
    star: int

    def to_dict(self) -> dict:
        return {"graph_id": self.graph_id, "avg_deg": self.avg_deg, "aspl": self.aspl,
                "two_hop": self.two_hop, "star": self.star}


@dataclass(frozen=True)
class CorpusStats:
    graph_count: int
    avg_deg: float
    aspl: float | None
    two_hop: float
    star: float
    aspl_defined_count: int

    def to_dict(self) -> dict:
        return {"graph_count": self.graph_count, "avg_deg": self.avg_deg, "aspl": self.aspl,
                "two_hop": self.two_hop, "star": self.star,
                "aspl_defined_count": self.aspl_defined_count}


@dataclass(frozen=True)
class TwoHopChain:
    a: str
    b: str
    c: str
    first: Relation
    second: Relation


@dataclass(frozen=True)
class HubMotif:
    center: str
    degree: int
    neighbors: tuple[str, ...]


def _distance_sum(adjacency) -> tuple[int, int]:
    """Sum of BFS distances over unordered connected pairs, and the pair count."""
    total = pairs = 0
    for src in adjacency:
        dist = {src: 0}
        queue = deque([src])
        while queue:
            x = queue.popleft()
            for y in adjacency[x]:
                if y not in dist:
                    dist[y] = dist[x] + 1
                    queue.append(y)
        total += sum(dist.values())
        pairs += len(dist) - 1
    # every unordered pair was seen from both ends
    return total // 2, pairs // 2


def _directed_neighbors(g: GraphState):
    succ: dict[str, set[str]] = {e.id: set() for e in g.entities}
    pred: dict[str, set[str]] = {e.id: set() for e in g.entities}
    for r in g.relations:
        if r.subject != r.object:
            succ[r.subject].add(r.object)
            pred[r.object].add(r.subject)
    return succ, pred


def count_two_hop(g: GraphState, count_mode: str = "node-triples") -> int:
    """Directed length-2 paths a->b->c with a, b, c pairwise distinct.

    ``node-triples`` counts distinct node triples (parallel predicates
    collapsed); ``relation-pairs`` counts pairs of witnessing relations.
    """
    if count_mode == "node-triples":
        succ, pred = _directed_neighbors(g)
        return sum(len(pred[b]) * len(succ[b]) - len(pred[b] & succ[b]) for b in succ)
    if count_mode == "relation-pairs":
        out_rel: dict[str, list[Relation]] = {e.id: [] for e in g.entities}
        in_rel: dict[str, list[Relation]] = {e.id: [] for e in g.entities}
        for r in g.relations:
            if r.subject != r.object:
                out_rel[r.subject].append(r)
                in_rel[r.object].append(r)
        return sum(
            1
            for b in out_rel
            for r1 in in_rel[b]
            for r2 in out_rel[b]
            if r1.subject != r2.object
        )
    raise ValueError(f"count_mode must be one of {COUNT_MODES}")


def graph_stats(g: GraphState, count_mode: str = "node-triples") -> StatRecord:
    require_valid(g)
    if not g.entities:
        raise EmptyGraphError("graph has no entities")
    view = undirected_simple_view(g)
    n = len(view.nodes)
    total, pairs = _distance_sum(view.adjacency)
    return StatRecord(
        graph_id=g.graph_id,
        avg_deg=2 * len(view.edges) / n,
        aspl=total / pairs if pairs else None,
        two_hop=count_two_hop(g, count_mode),
        star=sum(1 for ns in view.adjacency.values() if len(ns) >= HUB_MIN_DEGREE),
    )


def corpus_stats(graphs: Iterable[GraphState], count_mode: str = "node-triples") -> CorpusStats:
    """Macro-average per-graph statistics; ASPL is averaged over graphs where it is defined.

    Sums run in input order so results are reproducible.
    """
    count = defined = 0
    deg_sum = aspl_sum = two_hop_sum = star_sum = 0.0
    for g in graphs:
        rec = graph_stats(g, count_mode)
        count += 1
        deg_sum += rec.avg_deg
        two_hop_sum += rec.two_hop
        star_sum += rec.star
        if rec.aspl is not None:
            defined += 1
            aspl_sum += rec.aspl
    if count == 0:
        raise EmptyCorpusError("no graphs in corpus")
    return CorpusStats(
        graph_count=count,
        avg_deg=deg_sum / count,
        aspl=aspl_sum / defined if defined else None,
        two_hop=two_hop_sum / count,
        star=star_sum / count,
        aspl_defined_count=defined,
    )


def extract_two_hop_chains(g: GraphState) -> list[TwoHopChain]:
    require_valid(g)
    # smallest predicate witnesses each directed pair
    witness: dict[tuple[str, str], Relation] = {}
    for r in sorted(g.relations, key=lambda r: r.triple):
        if r.subject != r.object:
            witness.setdefault((r.subject, r.object), r)
    succ, _ = _directed_neighbors(g)
    chains = []
    for a in sorted(succ):
        for b in sorted(succ[a]):
            for c in sorted(succ[b]):
                if c != a:
                    chains.append(TwoHopChain(a, b, c, witness[(a, b)], witness[(b, c)]))
    return chains


def extract_hubs(g: GraphState) -> list[HubMotif]:
    view = undirected_simple_view(g)
    hubs = [
        HubMotif(node, len(ns), ns)
        for node, ns in view.adjacency.items()
        if len(ns) >= HUB_MIN_DEGREE
    ]
    hubs.sort(key=lambda h: (-h.degree, h.center))
    return hubs
