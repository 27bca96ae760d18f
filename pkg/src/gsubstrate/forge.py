"""Task instances built over graph states.

Generation instances (scene graphs from images, event graphs from text) carry
the serialized graph as gold. Understanding instances consume a graph:
molecule description, algorithmic questions, consistency checks against the
source input, and subgraph retrieval. Negatives for the last two are
structural perturbations that keep every entity and, for rewire/swap, every
predicate.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

from .corpus import DOMAIN_TASK, CorpusRecord, Source
from .errors import (
    EmptyDescriptionError,
    NoComponentLargeEnoughError,
    NoValidNegativeError,
    NoValidPerturbationError,
    PreconditionError,
    UnknownModalityError,
    UnsampleableQueryError,
)
from .graph import GraphState, Relation, Triple, require_valid, undirected_simple_view
from .ioutil import dumps
from .oracle import GarKind, GarQuery, bipartition, solve
from .schema_io import Realization, as_realization, serialize

TASKS = ("sgg", "ere", "mgd", "gar", "cc", "sr")
TASK_ROLE = {"sgg": "generate", "ere": "generate", "mgd": "understand",
             "gar": "understand", "cc": "understand", "sr": "understand"}
PERTURB_OPS = ("endpoint-rewire", "edge-swap", "delete-insert")
MAX_ATTEMPTS = 64


def derive_seed(master: int, *parts) -> int:
    """Stable 63-bit seed from a master seed and any JSON-able parts."""
    blob = dumps([master, *parts]).encode("utf-8")
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big") >> 1


@lru_cache(maxsize=1)
def templates() -> dict:
    text = resources.files("gsubstrate").joinpath("resources/templates_v1.json").read_text("utf-8")
    return json.loads(text)


def graph_ref(g: GraphState) -> str:
    """The graph's id, or a content digest when it has none."""
    if g.graph_id is not None:
        return g.graph_id
    digest = hashlib.sha256(serialize(g, Realization.CANONICAL_JSON).encode("utf-8")).hexdigest()
    return "sha256:" + digest[:16]


# instances --------------------------------------------------------------------


@dataclass(frozen=True)
class TaskInstance:
    instance_id: str
    task: str
    role: str
    realization: str
    input_text: str
    input_refs: list[str] | None
    gold: object
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if TASK_ROLE[self.task] != self.role:
            raise ValueError(f"task {self.task} has role {TASK_ROLE[self.task]}, not {self.role}")

    @property
    def source_graph_id(self) -> str:
        return self.provenance["source_graph_id"]

    @property
    def trajectory_step(self) -> int | None:
        return self.provenance.get("trajectory_step")

    def to_json(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "task": self.task,
            "role": self.role,
            "realization": self.realization,
            "input_text": self.input_text,
            "input_refs": self.input_refs,
            "gold": self.gold,
            "provenance": {
                "source_graph_id": self.provenance.get("source_graph_id"),
                "trajectory_step": self.provenance.get("trajectory_step"),
                "perturbation_applied": self.provenance.get("perturbation_applied"),
            },
        }

    @classmethod
    def from_json(cls, data: dict) -> TaskInstance:
        return cls(
            instance_id=data["instance_id"],
            task=data["task"],
            role=data["role"],
            realization=data["realization"],
            input_text=data["input_text"],
            input_refs=data.get("input_refs"),
            gold=data.get("gold"),
            provenance=dict(data.get("provenance") or {}),
        )


def _instance(task, realization, input_text, input_refs, gold, source_graph_id,
              trajectory_step=None, perturbation=None, instance_id=None) -> TaskInstance:
    provenance = {"source_graph_id": source_graph_id, "trajectory_step": trajectory_step,
                  "perturbation_applied": perturbation}
    if instance_id is None:
        digest = hashlib.sha256(
            dumps([task, str(realization), input_text, input_refs, gold, provenance]).encode("utf-8")
        ).hexdigest()
        instance_id = f"{task}-{digest[:16]}"
    return TaskInstance(instance_id, task, TASK_ROLE[task], str(realization), input_text,
                        input_refs, gold, provenance)


def graph_block(name: str, text: str) -> str:
    body = text if text.endswith("\n") else text + "\n"
    return f"--- {name} ---\n{body}--- end {name} ---"


def extract_graph_block(input_text: str, name: str) -> str:
    """Return the serialized graph between the named markers (last block wins)."""
    start_marker = f"--- {name} ---\n"
    end_marker = f"\n--- end {name} ---"
    start = input_text.rfind(start_marker)
    if start < 0:
        raise ValueError(f"no {name!r} block in input text")
    start += len(start_marker)
    end = input_text.find(end_marker, start)
    if end < 0:
        raise ValueError(f"unterminated {name!r} block")
    return input_text[start:end + 1]


def _format_name(realization: Realization) -> str:
    return templates()["graph_format"][realization.value]


# perturbations ----------------------------------------------------------------


@dataclass(frozen=True)
class PerturbationDescriptor:
    op: str
    touched: tuple[tuple[Triple, Triple], ...]
    seed: int

    def to_json(self) -> dict:
        return {"op": self.op,
                "touched": [{"before": list(b), "after": list(a)} for b, a in self.touched],
                "seed": self.seed}

    @classmethod
    def from_json(cls, data: dict) -> PerturbationDescriptor:
        touched = tuple((tuple(t["before"]), tuple(t["after"])) for t in data["touched"])
        return cls(data["op"], touched, int(data["seed"]))


def _candidate_moves(g: GraphState, op: str, ids: list[str], rng: random.Random | None):
    """Moves as lists of (relation index, new triple).

    With ``rng`` a single random candidate is drawn (possibly invalid); without
    it every candidate is yielded in a fixed order.
    """
    rels = g.relations
    if op == "endpoint-rewire":
        def targets(r):
            return [x for x in ids if x != r.subject and x != r.object]
        if rng is not None:
            i = rng.randrange(len(rels))
            options = targets(rels[i])
            if options:
                x = rng.choice(options)
                yield [(i, (rels[i].subject, rels[i].predicate, x))]
            return
        for i, r in enumerate(rels):
            for x in targets(r):
                yield [(i, (r.subject, r.predicate, x))]
    elif op == "edge-swap":
        if len(rels) < 2:
            return
        pairs = [tuple(rng.sample(range(len(rels)), 2))] if rng is not None else (
            (i, j) for i in range(len(rels)) for j in range(i + 1, len(rels)))
        for i, j in pairs:
            a, b = rels[i], rels[j]
            if a.object != b.object:
                yield [(i, (a.subject, a.predicate, b.object)), (j, (b.subject, b.predicate, a.object))]
    elif op == "delete-insert":
        if len(ids) < 2:
            return
        preds = sorted({r.predicate for r in rels})
        if rng is not None:
            i = rng.randrange(len(rels))
            x, y = rng.sample(ids, 2)
            candidates = [(i, x, y, rng.choice(preds))]
        else:
            candidates = ((i, x, y, p) for i in range(len(rels)) for x in ids for y in ids
                          if x != y for p in preds)
        for i, x, y, p in candidates:
            if {x, y} != {rels[i].subject, rels[i].object}:
                yield [(i, (x, p, y))]
    else:
        raise ValueError(f"unknown perturbation op {op!r}; expected one of {PERTURB_OPS}")


def _move_valid(move, triples: set) -> bool:
    new = [t for _, t in move]
    return len(set(new)) == len(new) and not any(t in triples for t in new)


def _apply_move(g: GraphState, op: str, move) -> GraphState:
    rels = list(g.relations)
    for i, (s, p, o) in move:
        attrs = () if op == "delete-insert" else rels[i].attrs
        rels[i] = Relation(s, p, o, attrs)
    return g.with_relations(rels)


def perturb(g: GraphState, op: str, seed: int) -> tuple[GraphState, PerturbationDescriptor]:
    """Rewire relational structure while keeping every entity unchanged.

    ``endpoint-rewire`` moves one relation's object to another entity (never
    its subject); ``edge-swap`` exchanges the objects of two relations;
    ``delete-insert`` replaces one relation by a relation with an existing
    predicate between a different pair of distinct entities. Up to 64 random
    draws are tried, then the full candidate set, so the error is raised only
    when no valid move exists.
    """
    require_valid(g)
    if op not in PERTURB_OPS:
        raise ValueError(f"unknown perturbation op {op!r}; expected one of {PERTURB_OPS}")
    if not g.relations:
        raise PreconditionError("graph has no relations to perturb")
    rng = random.Random(seed)
    ids = sorted(g.entity_ids)
    triples = set(g.triples)
    chosen = None
    for _ in range(MAX_ATTEMPTS):
        for move in _candidate_moves(g, op, ids, rng):
            if _move_valid(move, triples):
                chosen = move
        if chosen is not None:
            break
    if chosen is None:
        valid = [m for m in _candidate_moves(g, op, ids, None) if _move_valid(m, triples)]
        if not valid:
            raise NoValidPerturbationError(f"no valid {op} move exists")
        chosen = valid[rng.randrange(len(valid))]
    out = _apply_move(g, op, chosen)
    touched = tuple((g.relations[i].triple, t) for i, t in chosen)
    return out, PerturbationDescriptor(op, touched, seed)


def apply_perturbation(g: GraphState, descriptor: PerturbationDescriptor) -> GraphState:
    """Replay a recorded perturbation on ``g``."""
    index = {r.triple: i for i, r in enumerate(g.relations)}
    move = []
    for before, after in descriptor.touched:
        if tuple(before) not in index:
            raise ValueError(f"relation {before} is not in the graph")
        move.append((index[tuple(before)], tuple(after)))
    return _apply_move(g, descriptor.op, move)


def perturb_any(g: GraphState, seed: int) -> tuple[GraphState, PerturbationDescriptor]:
    """Try the operators in a seed-determined order; first success wins."""
    ops = list(PERTURB_OPS)
    random.Random(seed).shuffle(ops)
    for op in ops:
        try:
            return perturb(g, op, derive_seed(seed, op))
        except (NoValidPerturbationError, PreconditionError):
            continue
    raise NoValidPerturbationError("no operator yields a valid perturbation")


# subgraphs ----------------------------------------------------------------------


def induced_subgraph(g: GraphState, ids) -> GraphState:
    keep = set(ids)
    entities = tuple(e for e in g.entities if e.id in keep)
    relations = tuple(r for r in g.relations if r.subject in keep and r.object in keep)
    return GraphState(entities, relations)


def sample_connected_subgraph(g: GraphState, k: int, seed: int) -> GraphState:
    """Induced subgraph on ``k`` entities grown from a random seed node."""
    if k < 2:
        raise PreconditionError("k must be at least 2")
    view = undirected_simple_view(g)
    eligible = []
    seen: set[str] = set()
    for node in sorted(view.nodes):
        if node in seen:
            continue
        comp = {node}
        stack = [node]
        while stack:
            for y in view.adjacency[stack.pop()]:
                if y not in comp:
                    comp.add(y)
                    stack.append(y)
        seen |= comp
        if len(comp) >= k:
            eligible.extend(comp)
    if not eligible:
        raise NoComponentLargeEnoughError(f"no connected component has {k} entities")
    rng = random.Random(seed)
    start = rng.choice(sorted(eligible))
    selected = {start}
    frontier = set(view.adjacency[start])
    while len(selected) < k:
        nxt = rng.choice(sorted(frontier))
        selected.add(nxt)
        frontier |= set(view.adjacency[nxt])
        frontier -= selected
    return induced_subgraph(g, selected)


def contains_subgraph(g: GraphState, s: GraphState) -> bool:
    require_valid(g)
    require_valid(s)
    ents = {(e.id, e.label) for e in g.entities}
    return ({(e.id, e.label) for e in s.entities} <= ents
            and set(s.triples) <= set(g.triples))


# instance builders ----------------------------------------------------------------


def make_generation_instance(source: Source, g: GraphState, realization, *, instance_id=None,
                             source_graph_id=None) -> TaskInstance:
    require_valid(g)
    realization = as_realization(realization)
    t = templates()
    fmt = _format_name(realization)
    if source.kind == "image_ref":
        task, text, refs = "sgg", t["sgg"].format(format=fmt), [source.value]
    elif source.kind == "text":
        task, refs = "ere", None
        text = t["ere"].format(format=fmt) + "\nText:\n" + source.value
    else:
        raise UnknownModalityError(f"cannot generate a graph from a {source.kind} source")
    return _instance(task, realization, text, refs, serialize(g, realization),
                     source_graph_id or graph_ref(g), trajectory_step=0, instance_id=instance_id)


def make_description_instance(g: GraphState, smiles: str | None, description: str, realization, *,
                              instance_id=None, source_graph_id=None) -> TaskInstance:
    if not description or not description.strip():
        raise EmptyDescriptionError("description is empty")
    require_valid(g)
    realization = as_realization(realization)
    parts = [templates()["mgd"].format(format=_format_name(realization)),
             graph_block("graph", serialize(g, realization))]
    if smiles:
        parts.append(f"SMILES: {smiles}")
    return _instance("mgd", realization, "\n".join(parts), None, description,
                     source_graph_id or graph_ref(g), instance_id=instance_id)


def gar_query(g: GraphState, kind, seed: int, *, weighted: bool | None = None,
              direction: str = "undirected") -> GarQuery:
    """Build a query of ``kind`` whose endpoints are drawn from ``seed``."""
    kind = GarKind(kind)
    if kind in (GarKind.CONNECTIVITY, GarKind.SHORTEST_PATH):
        ids = sorted(g.entity_ids)
        if len(ids) < 2:
            raise UnsampleableQueryError(f"{kind} needs at least 2 entities")
        u, v = random.Random(seed).sample(ids, 2)
        return GarQuery(kind, u, v, weighted=weighted if kind is GarKind.SHORTEST_PATH else None)
    if kind is GarKind.CYCLE:
        return GarQuery(kind, direction=direction)
    return GarQuery(kind)


def make_gar_instance(g: GraphState, kind, seed: int, realization, *, weighted: bool | None = None,
                      direction: str = "undirected", instance_id=None, source_graph_id=None,
                      trajectory_step=None) -> TaskInstance:
    require_valid(g)
    realization = as_realization(realization)
    query = gar_query(g, kind, seed, weighted=weighted, direction=direction)
    answer = solve(g, query)
    t = templates()["gar"]
    if query.kind is GarKind.CYCLE:
        key = f"cycle-{query.direction}"
    elif query.kind is GarKind.SHORTEST_PATH:
        key = "shortest-path-weighted" if answer.weighted else "shortest-path-unweighted"
    else:
        key = query.kind.value
    question = t[key].format(format=_format_name(realization), source=query.source, target=query.target)
    text = question + "\n" + graph_block("graph", serialize(g, realization))
    return _instance("gar", realization, text, None, answer.to_json(),
                     source_graph_id or graph_ref(g), trajectory_step=trajectory_step,
                     instance_id=instance_id)


def _source_parts(source: Source) -> tuple[list[str], list[str] | None, str]:
    if source.kind == "image_ref":
        return [], [source.value], templates()["modality"]["image_ref"]
    if source.kind == "text":
        return ["Text:\n" + source.value], None, templates()["modality"]["text"]
    raise UnknownModalityError(f"consistency checks need a text or image source, not {source.kind}")


def make_consistency_instance(source: Source, g: GraphState, label: bool, seed: int, realization, *,
                              instance_id=None, source_graph_id=None,
                              trajectory_step=None) -> TaskInstance:
    require_valid(g)
    realization = as_realization(realization)
    parts, refs, modality = _source_parts(source)
    candidate, descriptor = g, None
    if not label:
        candidate, descriptor = perturb_any(g, seed)
    question = templates()["cc"].format(format=_format_name(realization), modality=modality)
    text = "\n".join([question, *parts, graph_block("candidate graph", serialize(candidate, realization))])
    return _instance("cc", realization, text, refs, bool(label), source_graph_id or graph_ref(g),
                     trajectory_step=trajectory_step,
                     perturbation=None if descriptor is None else descriptor.to_json(),
                     instance_id=instance_id)


def make_subgraph_instance(g: GraphState, k: int, positive: bool, seed: int, realization, *,
                           instance_id=None, source_graph_id=None,
                           trajectory_step=None) -> TaskInstance:
    require_valid(g)
    realization = as_realization(realization)
    descriptor = None
    if positive:
        query = sample_connected_subgraph(g, k, derive_seed(seed, "sample", 0))
    else:
        query = None
        for attempt in range(MAX_ATTEMPTS):
            sub = sample_connected_subgraph(g, k, derive_seed(seed, "sample", attempt))
            try:
                cand, desc = perturb_any(sub, derive_seed(seed, "perturb", attempt))
            except NoValidPerturbationError:
                continue
            if not contains_subgraph(g, cand):
                query, descriptor = cand, desc
                break
        if query is None:
            raise NoValidNegativeError(f"no absent subgraph of size {k} after {MAX_ATTEMPTS} draws")
    question = templates()["sr"].format(format=_format_name(realization))
    text = "\n".join([question, graph_block("graph", serialize(g, realization)),
                      graph_block("query subgraph", serialize(query, realization))])
    return _instance("sr", realization, text, None, bool(positive), source_graph_id or graph_ref(g),
                     trajectory_step=trajectory_step,
                     perturbation=None if descriptor is None else descriptor.to_json(),
                     instance_id=instance_id)


def default_gar_kind(g: GraphState, seed: int) -> GarKind:
    """Pick a query kind the graph supports (matching only for bipartite graphs)."""
    kinds = [GarKind.CYCLE]
    if len(g.entities) >= 2:
        kinds += [GarKind.CONNECTIVITY, GarKind.SHORTEST_PATH]
    try:
        bipartition(g)
        kinds.append(GarKind.MATCHING)
    except ValueError:
        pass
    return random.Random(seed).choice(kinds)


def instance_from_record(record: CorpusRecord, realization, seed: int, *, task: str | None = None,
                         instance_id: str | None = None) -> TaskInstance:
    """Forge the base instance a corpus record supplies for its domain's task."""
    task = task or DOMAIN_TASK[record.domain]
    iid = instance_id or f"{task}:{record.id}"
    g = record.graph
    if task in ("sgg", "ere"):
        if record.source is None:
            raise UnknownModalityError(f"record {record.id} has no source to generate from")
        inst = make_generation_instance(record.source, g, realization, instance_id=iid)
        if inst.task != task:
            raise UnknownModalityError(f"record {record.id}: {record.source.kind} source gives {inst.task}, not {task}")
        return inst
    if task == "mgd":
        smiles = record.source.value if record.source and record.source.kind == "smiles" else None
        smiles = smiles or record.meta.get("smiles")
        return make_description_instance(g, smiles, record.target_text or "", realization, instance_id=iid)
    if task == "gar":
        kind = record.meta.get("gar_kind") or default_gar_kind(g, derive_seed(seed, "kind"))
        return make_gar_instance(g, kind, seed, realization, weighted=record.meta.get("weighted"),
                                 direction=record.meta.get("direction", "undirected"), instance_id=iid)
    raise ValueError(f"records do not supply base {task} instances")
