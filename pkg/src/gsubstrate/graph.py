"""Unified graph state: entities, typed directed relations, and derived views."""

from __future__ import annotations

import math
import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

from .errors import InvalidGraphError, SchemaSyntaxError, UnknownNodeError

_ID_FORBIDDEN = set(",():")
_DECIMAL_RE = re.compile(r"^\+?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?$")

Triple = tuple[str, str, str]


def _as_attr_pairs(attrs) -> tuple[tuple[str, str], ...]:
    if attrs is None:
        return ()
    if isinstance(attrs, Mapping):
        return tuple((str(k), str(v)) for k, v in attrs.items())
    return tuple((str(k), str(v)) for k, v in attrs)


def is_valid_id(value: object) -> bool:
    if not isinstance(value, str) or not value:
        return False
    return not any(c.isspace() or c in _ID_FORBIDDEN for c in value)


def parse_weight(text: str) -> Fraction:
    """Parse a relation weight as an exact non-negative decimal.

    Raises ``ValueError`` for anything that is not a finite decimal >= 0.
    """
    text = text.strip()
    if not _DECIMAL_RE.match(text):
        raise ValueError(f"weight {text!r} is not a non-negative decimal")
    value = Fraction(text)
    if not math.isfinite(float(value)):
        raise ValueError(f"weight {text!r} is not finite")
    return value


@dataclass(frozen=True)
class Entity:
    id: str
    label: str | None = None
    attrs: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "attrs", _as_attr_pairs(self.attrs))

    def attr(self, key: str, default: str | None = None) -> str | None:
        for k, v in self.attrs:
            if k == key:
                return v
        return default


@dataclass(frozen=True)
class Relation:
    subject: str
    predicate: str
    object: str
    attrs: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "attrs", _as_attr_pairs(self.attrs))

    @property
    def triple(self) -> Triple:
        return (self.subject, self.predicate, self.object)

    def attr(self, key: str, default: str | None = None) -> str | None:
        for k, v in self.attrs:
            if k == key:
                return v
        return default

    @property
    def weight(self) -> Fraction | None:
        raw = self.attr("weight")
        return None if raw is None else parse_weight(raw)


@dataclass(frozen=True)
class GraphState:
    entities: tuple[Entity, ...] = ()
    relations: tuple[Relation, ...] = ()
    graph_id: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "entities", tuple(self.entities))
        object.__setattr__(self, "relations", tuple(self.relations))

    @cached_property
    def _entity_index(self) -> dict[str, Entity]:
        return {e.id: e for e in self.entities}

    def entity(self, entity_id: str) -> Entity:
        try:
            return self._entity_index[entity_id]
        except KeyError:
            raise UnknownNodeError(f"unknown node {entity_id}") from None

    @cached_property
    def _violations(self) -> tuple:
        return tuple(_find_violations(self))

    @cached_property
    def _undirected_view(self):
        return _build_undirected_view(self)

    def has_entity(self, entity_id: str) -> bool:
        return entity_id in self._entity_index

    @property
    def entity_ids(self) -> list[str]:
        return [e.id for e in self.entities]

    @property
    def triples(self) -> list[Triple]:
        return [r.triple for r in self.relations]

    def with_relations(self, relations: Iterable[Relation]) -> GraphState:
        return GraphState(self.entities, tuple(relations), self.graph_id)

    # canonical JSON object form

    def to_dict(self) -> dict:
        """Canonical JSON object; entities and relations sorted, keys in fixed order."""
        out: dict = {}
        if self.graph_id is not None:
            out["graph_id"] = self.graph_id
        ents = []
        for e in sorted(self.entities, key=lambda e: e.id):
            item: dict = {"id": e.id}
            if e.label is not None:
                item["label"] = e.label
            if e.attrs:
                item["attrs"] = dict(sorted(e.attrs))
            ents.append(item)
        rels = []
        for r in sorted(self.relations, key=lambda r: r.triple):
            item = {"subject": r.subject, "predicate": r.predicate, "object": r.object}
            if r.attrs:
                item["attrs"] = dict(sorted(r.attrs))
            rels.append(item)
        out["entities"] = ents
        out["relations"] = rels
        return out

    @classmethod
    def from_dict(cls, data: object) -> GraphState:
        """Build a graph from its JSON object form, checking field types only."""
        if not isinstance(data, dict):
            raise SchemaSyntaxError("graph must be a JSON object", "$", "object")
        graph_id = data.get("graph_id")
        if graph_id is not None and not isinstance(graph_id, str):
            raise SchemaSyntaxError("graph_id must be a string", "$.graph_id", "string")
        ents_raw = data.get("entities", [])
        rels_raw = data.get("relations", [])
        if not isinstance(ents_raw, list):
            raise SchemaSyntaxError("entities must be a list", "$.entities", "array")
        if not isinstance(rels_raw, list):
            raise SchemaSyntaxError("relations must be a list", "$.relations", "array")
        entities = []
        for i, item in enumerate(ents_raw):
            where = f"$.entities[{i}]"
            if not isinstance(item, dict) or not isinstance(item.get("id"), str):
                raise SchemaSyntaxError("entity needs a string id", where, '{"id": string}')
            label = item.get("label")
            if label is not None and not isinstance(label, str):
                raise SchemaSyntaxError("label must be a string", where + ".label", "string")
            entities.append(Entity(item["id"], label, _attrs_from_json(item.get("attrs"), where)))
        relations = []
        for i, item in enumerate(rels_raw):
            where = f"$.relations[{i}]"
            if not isinstance(item, dict):
                raise SchemaSyntaxError("relation must be an object", where, "object")
            for key in ("subject", "predicate", "object"):
                if not isinstance(item.get(key), str):
                    raise SchemaSyntaxError(f"relation needs a string {key}", where, key)
            relations.append(
                Relation(item["subject"], item["predicate"], item["object"],
                         _attrs_from_json(item.get("attrs"), where))
            )
        return cls(tuple(entities), tuple(relations), graph_id)


def _attrs_from_json(raw, where: str) -> tuple[tuple[str, str], ...]:
    if raw is None:
        return ()
    if not isinstance(raw, dict):
        raise SchemaSyntaxError("attrs must be an object", where + ".attrs", "object")
    for k, v in raw.items():
        if not isinstance(v, str):
            raise SchemaSyntaxError(f"attr {k!r} must be a string", where + ".attrs", "string")
    return tuple(raw.items())


@dataclass(frozen=True)
class Violation:
    rule: str
    message: str
    entity_index: int | None = None
    relation_index: int | None = None


def validate(g: GraphState) -> list[Violation]:
    """Return every invariant violation in ``g``; an empty list means valid."""
    return list(g._violations)


def _find_violations(g: GraphState) -> list[Violation]:
    out: list[Violation] = []
    seen: set[str] = set()
    for i, e in enumerate(g.entities):
        if not is_valid_id(e.id):
            out.append(Violation("entity-id", f"invalid entity id {e.id!r}", entity_index=i))
        if e.id in seen:
            out.append(Violation("duplicate-entity", f"duplicate entity id {e.id}", entity_index=i))
        seen.add(e.id)
        if e.label is not None and not isinstance(e.label, str):
            out.append(Violation("entity-label", f"label of {e.id} is not a string", entity_index=i))
        out.extend(_attr_violations(e.attrs, f"entity {e.id}", entity_index=i))

    triples: set[Triple] = set()
    for i, r in enumerate(g.relations):
        where = f"relation {i}"
        if not isinstance(r.predicate, str) or not r.predicate or "\n" in r.predicate or "\r" in r.predicate:
            out.append(Violation("predicate", f"{where}: invalid predicate {r.predicate!r}", relation_index=i))
        if r.subject not in seen:
            out.append(Violation("dangling-subject", f"dangling subject {r.subject}", relation_index=i))
        if r.object not in seen:
            out.append(Violation("dangling-object", f"dangling object {r.object}", relation_index=i))
        if r.triple in triples:
            out.append(Violation(
                "duplicate-relation",
                f"duplicate relation ({r.subject}, {r.predicate}, {r.object})",
                relation_index=i,
            ))
        triples.add(r.triple)
        out.extend(_attr_violations(r.attrs, where, relation_index=i))
        raw_weight = r.attr("weight")
        if raw_weight is not None:
            try:
                parse_weight(raw_weight)
            except ValueError as exc:
                out.append(Violation("weight", f"{where}: {exc}", relation_index=i))
    return out


def _attr_violations(attrs, where: str, **index) -> list[Violation]:
    out = []
    keys: set[str] = set()
    for k, _ in attrs:
        if not k:
            out.append(Violation("attr-key", f"{where}: empty attribute key", **index))
        elif k in keys:
            out.append(Violation("attr-key", f"{where}: duplicate attribute key {k!r}", **index))
        keys.add(k)
    return out


def require_valid(g: GraphState) -> GraphState:
    violations = validate(g)
    if violations:
        raise InvalidGraphError(violations)
    return g


@dataclass(frozen=True)
class UndirectedSimpleView:
    nodes: frozenset[str]
    edges: frozenset[frozenset[str]]
    adjacency: Mapping[str, tuple[str, ...]] = field(default_factory=dict, compare=False, repr=False)

    def neighbors(self, node: str) -> tuple[str, ...]:
        if node not in self.nodes:
            raise UnknownNodeError(f"unknown node {node}")
        return self.adjacency.get(node, ())


def undirected_simple_view(g: GraphState) -> UndirectedSimpleView:
    require_valid(g)
    return g._undirected_view


def _build_undirected_view(g: GraphState) -> UndirectedSimpleView:
    edges = {frozenset((r.subject, r.object)) for r in g.relations if r.subject != r.object}
    adj: dict[str, list[str]] = {e.id: [] for e in g.entities}
    for edge in edges:
        a, b = tuple(edge)
        adj[a].append(b)
        adj[b].append(a)
    adjacency = {n: tuple(sorted(ns)) for n, ns in adj.items()}
    return UndirectedSimpleView(frozenset(adj), frozenset(edges), adjacency)


def degree(view: UndirectedSimpleView, node: str) -> int:
    return len(view.neighbors(node))


def directed_simple_edges(g: GraphState) -> set[tuple[str, str]]:
    """Directed (subject, object) pairs with parallel predicates collapsed; self-loops kept."""
    return {(r.subject, r.object) for r in g.relations}


def _structure_key(g: GraphState):
    ents = frozenset((e.id, e.label) for e in g.entities)
    rels = frozenset((r.subject, r.predicate, r.object, frozenset(r.attrs)) for r in g.relations)
    return ents, rels


def structural_equal(a: GraphState, b: GraphState) -> bool:
    """Equality of entity labels and relation triples (with attrs), ignoring order and graph_id."""
    require_valid(a)
    require_valid(b)
    return _structure_key(a) == _structure_key(b)
