"""Training schedules for the six paradigms.

=========  ===========  ============
paradigm   schema       interleaving
=========  ===========  ============
NST        native       single-task streams
UST        unified      single-task streams
NMT        native       one mixed stream
UMT        unified      one mixed stream
NMT-I      native       mixed + interleaved
G-Sub      unified      mixed + interleaved
=========  ===========  ============

Interleaving forges ``floor(ratio * |base|)`` extra understanding instances
(graph-algorithm, consistency-check, subgraph-retrieval) from the gold graphs
of generation instances and places each after its producer, recording a
trajectory link.
"""

from __future__ import annotations

import json
import math
import random
from collections import Counter
from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

from .corpus import CorpusRecord
from .errors import (
    EmptyCorpusError,
    GSubError,
    InvalidScheduleError,
    NoGenerationSourceError,
)
from .forge import (
    TASK_ROLE,
    TaskInstance,
    apply_perturbation,
    contains_subgraph,
    default_gar_kind,
    derive_seed,
    extract_graph_block,
    induced_subgraph,
    instance_from_record,
    make_consistency_instance,
    make_gar_instance,
    make_subgraph_instance,
    PerturbationDescriptor,
)
from .graph import GraphState, structural_equal
from .ioutil import atomic_write, dumps
from .oracle import components
from .schema_io import Realization, parse

PARADIGMS = ("NST", "UST", "NMT", "UMT", "NMT-I", "G-Sub")
UNIFIED_PARADIGMS = ("UST", "UMT", "G-Sub")
INTERLEAVING_PARADIGMS = ("NMT-I", "G-Sub")
SINGLE_TASK_PARADIGMS = ("NST", "UST")
BASE_TASKS = ("sgg", "ere", "mgd", "gar")
INTERLEAVE_KINDS = ("gar", "cc", "sr")
NATIVE_DEFAULT = {
    "ere": Realization.NATURAL_LANGUAGE,
    "sgg": Realization.XML_STYLE,
    "gar": Realization.UNIFIED_TEXT,
    "mgd": Realization.UNIFIED_TEXT,
}
PLACEMENTS = ("adjacent", "random-offset")


def normalize_paradigm(name: str) -> str:
    for p in PARADIGMS:
        if p.lower() == str(name).lower():
            return p
    raise ValueError(f"unknown paradigm {name!r}; expected one of {PARADIGMS}")


@dataclass(frozen=True)
class TaskCatalogEntry:
    task: str
    role: str
    schema_mode: str = "native"
    corpus_ref: str = ""
    native_realization: str | None = None

    def __post_init__(self):
        if self.task not in BASE_TASKS:
            raise ValueError(f"catalog task must be one of {BASE_TASKS}, got {self.task!r}")
        if TASK_ROLE[self.task] != self.role:
            raise ValueError(f"task {self.task} has role {TASK_ROLE[self.task]}, not {self.role}")
        if self.schema_mode not in ("native", "unified"):
            raise ValueError("schema_mode must be native or unified")
        if self.native_realization is not None:
            Realization(self.native_realization)

    def realization(self, unified: bool) -> Realization:
        if unified or self.schema_mode == "unified":
            return Realization.UNIFIED_TEXT
        if self.native_realization is not None:
            return Realization(self.native_realization)
        return NATIVE_DEFAULT[self.task]

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ParadigmConfig:
    paradigm: str
    interleave_ratio: float = 0.0
    interleave_mix: Mapping[str, float] = field(
        default_factory=lambda: {"gar": 1 / 3, "cc": 1 / 3, "sr": 1 / 3})
    seed: int = 0
    placement: str = "adjacent"
    chain_depth: int = 1
    cc_positive_fraction: float = 0.5
    sr_positive_fraction: float = 0.5
    sr_k: int = 3

    def __post_init__(self):
        object.__setattr__(self, "paradigm", normalize_paradigm(self.paradigm))
        if not 0 <= self.interleave_ratio <= 1:
            raise ValueError("interleave_ratio must lie in [0, 1]")
        if self.paradigm not in INTERLEAVING_PARADIGMS and self.interleave_ratio != 0:
            raise ValueError(f"{self.paradigm} does not interleave; interleave_ratio must be 0")
        mix = dict(self.interleave_mix)
        if set(mix) - set(INTERLEAVE_KINDS):
            raise ValueError(f"interleave_mix keys must be among {INTERLEAVE_KINDS}")
        if any(w < 0 for w in mix.values()) or abs(sum(mix.values()) - 1) > 1e-9:
            raise ValueError("interleave_mix weights must be non-negative and sum to 1")
        object.__setattr__(self, "interleave_mix", {k: mix.get(k, 0.0) for k in INTERLEAVE_KINDS})
        if self.placement not in PLACEMENTS:
            raise ValueError(f"placement must be one of {PLACEMENTS}")
        if self.chain_depth < 1:
            raise ValueError("chain_depth must be >= 1")
        if self.sr_k < 2:
            raise ValueError("sr_k must be >= 2")

    @property
    def unified(self) -> bool:
        return self.paradigm in UNIFIED_PARADIGMS

    @property
    def interleaving(self) -> bool:
        return self.paradigm in INTERLEAVING_PARADIGMS

    def to_json(self) -> dict:
        out = asdict(self)
        out["interleave_mix"] = dict(self.interleave_mix)
        return out


@dataclass
class TrainingSchedule:
    config: ParadigmConfig
    streams: list[list[TaskInstance]]
    links: list[tuple[str, str]]
    catalog: list[TaskCatalogEntry] = field(default_factory=list)

    @property
    def instances(self) -> list[TaskInstance]:
        return [inst for stream in self.streams for inst in stream]

    def header(self) -> dict:
        base = sum(1 for i in self.instances if not _is_interleaved(i))
        return {
            "format": "gsubstrate-schedule/1",
            "config": self.config.to_json(),
            "seed": self.config.seed,
            "catalog": [e.to_json() for e in self.catalog],
            "streams": [{"tasks": sorted({i.task for i in s}), "count": len(s)} for s in self.streams],
            "counts": {"base": base, "interleaved": len(self.instances) - base,
                       "links": len(self.links)},
        }


def _is_interleaved(inst: TaskInstance) -> bool:
    step = inst.trajectory_step
    return step is not None and step >= 1


def interleave_count(ratio: float, base: int) -> int:
    # decimal reading of the ratio keeps e.g. 0.29 * 100 at exactly 29
    return math.floor(Fraction(repr(float(ratio))) * base)


def split_by_weights(total: int, weights: Mapping[str, float]) -> dict[str, int]:
    """Largest-remainder apportionment; ties go to the earlier kind."""
    quotas = {k: Fraction(w) * total for k, w in weights.items()}
    counts = {k: math.floor(q) for k, q in quotas.items()}
    left = total - sum(counts.values())
    order = sorted(weights, key=lambda k: (-(quotas[k] - counts[k]), INTERLEAVE_KINDS.index(k)))
    for k in order[:left]:
        counts[k] += 1
    return counts


def balanced_labels(count: int, positive_fraction: float, rng: random.Random) -> list[bool]:
    positives = math.floor(count * positive_fraction + 0.5)
    labels = [True] * positives + [False] * (count - positives)
    rng.shuffle(labels)
    return labels


def _forge_consumer(kind: str, producer: TaskInstance, record: CorpusRecord, label: bool,
                    seed: int, config: ParadigmConfig, instance_id: str, step: int) -> TaskInstance:
    g = record.graph
    common = dict(instance_id=instance_id, source_graph_id=producer.source_graph_id,
                  trajectory_step=step)
    realization = producer.realization
    if kind == "gar":
        return make_gar_instance(g, default_gar_kind(g, derive_seed(seed, "kind")), seed, realization,
                                 **common)
    if kind == "cc":
        return make_consistency_instance(record.source, g, label, seed, realization, **common)
    largest = max((len(c) for c in components(g)), default=0)
    return make_subgraph_instance(g, min(config.sr_k, largest), label, seed, realization, **common)


def build_schedule(catalog: Sequence[TaskCatalogEntry], records: Mapping[str, Sequence[CorpusRecord]],
                   config: ParadigmConfig) -> TrainingSchedule:
    """Assemble the instance streams for ``config.paradigm``.

    ``records`` maps each catalog task to its corpus records; base instances
    are forged from them in the realization the paradigm calls for.
    """
    if not catalog:
        raise EmptyCorpusError("catalog is empty")
    seed = config.seed
    base: dict[str, list[TaskInstance]] = {}
    record_of: dict[str, CorpusRecord] = {}
    for entry in catalog:
        recs = list(records.get(entry.task, ()))
        if not recs:
            raise EmptyCorpusError(f"no records for task {entry.task}")
        realization = entry.realization(config.unified)
        insts = []
        for idx, rec in enumerate(recs):
            inst = instance_from_record(rec, realization, derive_seed(seed, entry.task, idx),
                                        task=entry.task)
            record_of[inst.instance_id] = rec
            insts.append(inst)
        base[entry.task] = insts

    if config.paradigm in SINGLE_TASK_PARADIGMS:
        streams = []
        for entry in catalog:
            stream = list(base[entry.task])
            random.Random(derive_seed(seed, "stream", entry.task)).shuffle(stream)
            streams.append(stream)
        return TrainingSchedule(config, streams, [], list(catalog))

    mixture = [inst for entry in catalog for inst in base[entry.task]]
    random.Random(derive_seed(seed, "mixture")).shuffle(mixture)
    total = interleave_count(config.interleave_ratio, len(mixture)) if config.interleaving else 0
    if total == 0:
        return TrainingSchedule(config, [mixture], [], list(catalog))

    producers = [inst for inst in mixture if inst.role == "generate"]
    if not producers:
        raise NoGenerationSourceError("interleaving needs at least one generation instance")
    counts = split_by_weights(total, config.interleave_mix)
    kinds = [k for k in INTERLEAVE_KINDS for _ in range(counts[k])]
    random.Random(derive_seed(seed, "kinds")).shuffle(kinds)
    labels = {
        "cc": iter(balanced_labels(counts["cc"], config.cc_positive_fraction, random.Random(derive_seed(seed, "cc")))),
        "sr": iter(balanced_labels(counts["sr"], config.sr_positive_fraction, random.Random(derive_seed(seed, "sr")))),
        "gar": iter([True] * counts["gar"]),
    }
    rotation = list(producers)
    random.Random(derive_seed(seed, "producers")).shuffle(rotation)

    attached: dict[str, list[TaskInstance]] = {p.instance_id: [] for p in producers}
    created: list[TaskInstance] = []
    links: list[tuple[str, str]] = []
    for j, kind in enumerate(kinds):
        label = next(labels[kind])
        consumer = None
        failures = []
        for offset in range(len(rotation)):
            producer = rotation[(j + offset) % len(rotation)]
            chain = attached[producer.instance_id]
            q = len(chain)
            step = q % config.chain_depth + 1
            predecessor = producer if step == 1 else chain[-1]
            try:
                consumer = _forge_consumer(
                    kind, producer, record_of[producer.instance_id], label,
                    derive_seed(seed, "interleave", j, offset), config,
                    f"{producer.instance_id}>{kind}#{j}", step,
                )
            except GSubError as exc:
                failures.append(f"{producer.instance_id}: {exc}")
                continue
            chain.append(consumer)
            links.append((predecessor.instance_id, consumer.instance_id))
            created.append(consumer)
            break
        if consumer is None:
            raise NoGenerationSourceError(
                f"no generation graph supports an interleaved {kind} instance ({'; '.join(failures[:3])})"
            )

    stream = _place(mixture, created, links, config)
    return TrainingSchedule(config, [stream], links, list(catalog))


def _place(mixture, created, links, config) -> list[TaskInstance]:
    position = {inst.instance_id: i for i, inst in enumerate(mixture)}
    predecessor = {c: p for p, c in links}
    anchor: dict[str, int] = {}
    rng = random.Random(derive_seed(config.seed, "placement"))
    for inst in created:
        p = predecessor[inst.instance_id]
        low = position[p] if p in position else anchor[p]
        if config.placement == "adjacent":
            anchor[inst.instance_id] = low
        else:
            anchor[inst.instance_id] = rng.randint(low, len(mixture) - 1)
    after: dict[int, list[TaskInstance]] = {}
    for inst in created:
        after.setdefault(anchor[inst.instance_id], []).append(inst)
    out = []
    for i, inst in enumerate(mixture):
        out.append(inst)
        out.extend(after.get(i, ()))
    return out


# validation and summaries -------------------------------------------------------


@dataclass(frozen=True)
class ScheduleViolation:
    rule: str
    message: str


def _graph_of(inst: TaskInstance, block: str = "graph") -> GraphState:
    if inst.role == "generate":
        return parse(inst.gold, inst.realization)
    return parse(extract_graph_block(inst.input_text, block), inst.realization)


def _check_consumer(consumer: TaskInstance, root: GraphState) -> str | None:
    """Return a problem description, or None when the embedded graphs are sound."""
    desc_raw = consumer.provenance.get("perturbation_applied")
    if consumer.task == "gar":
        if not structural_equal(_graph_of(consumer), root):
            return "embedded graph differs from the producer's gold graph"
        return None
    if consumer.task == "cc":
        candidate = _graph_of(consumer, "candidate graph")
        if consumer.gold is True:
            if desc_raw is not None:
                return "positive consistency instance carries a perturbation"
            return None if structural_equal(candidate, root) else "candidate differs from gold graph"
        if desc_raw is None:
            return "negative consistency instance lacks a perturbation descriptor"
        expected = apply_perturbation(root, PerturbationDescriptor.from_json(desc_raw))
        if not structural_equal(candidate, expected) or structural_equal(candidate, root):
            return "candidate is not the recorded perturbation of the gold graph"
        return None
    if consumer.task == "sr":
        if not structural_equal(_graph_of(consumer), root):
            return "embedded graph differs from the producer's gold graph"
        query = _graph_of(consumer, "query subgraph")
        if consumer.gold is True:
            return None if contains_subgraph(root, query) else "positive query is not contained"
        if desc_raw is None:
            return "negative retrieval instance lacks a perturbation descriptor"
        sub = induced_subgraph(root, query.entity_ids)
        expected = apply_perturbation(sub, PerturbationDescriptor.from_json(desc_raw))
        if not structural_equal(query, expected) or contains_subgraph(root, query):
            return "query is not the recorded perturbation of a contained subgraph"
        return None
    return f"task {consumer.task} cannot consume a trajectory graph"


def validate_schedule(s: TrainingSchedule) -> list[ScheduleViolation]:
    out: list[ScheduleViolation] = []
    cfg = s.config
    tasks_per_stream = [{i.task for i in stream} for stream in s.streams]
    if cfg.paradigm in SINGLE_TASK_PARADIGMS:
        for k, tasks in enumerate(tasks_per_stream):
            if len(tasks) != 1:
                out.append(ScheduleViolation("stream-shape", f"stream {k} mixes tasks {sorted(tasks)}"))
        flat = [t for tasks in tasks_per_stream for t in tasks]
        if len(flat) != len(set(flat)):
            out.append(ScheduleViolation("stream-shape", "a task appears in more than one stream"))
    elif len(s.streams) != 1:
        out.append(ScheduleViolation("stream-shape", f"{cfg.paradigm} needs one stream, got {len(s.streams)}"))

    by_id: dict[str, TaskInstance] = {}
    where: dict[str, tuple[int, int]] = {}
    for k, stream in enumerate(s.streams):
        for pos, inst in enumerate(stream):
            if inst.instance_id in by_id:
                out.append(ScheduleViolation("duplicate-id", f"instance id {inst.instance_id} repeats"))
            by_id[inst.instance_id] = inst
            where[inst.instance_id] = (k, pos)

    native = {e.task: e.realization(False) for e in s.catalog}
    predecessor: dict[str, str] = {}
    for producer_id, consumer_id in s.links:
        if producer_id not in by_id or consumer_id not in by_id:
            out.append(ScheduleViolation("dangling-link", f"link {producer_id} -> {consumer_id}"))
            continue
        if consumer_id in predecessor:
            out.append(ScheduleViolation("dangling-link", f"{consumer_id} has two producers"))
        predecessor[consumer_id] = producer_id
        (sp, pp), (sc, pc) = where[producer_id], where[consumer_id]
        if sp != sc or pc <= pp:
            out.append(ScheduleViolation("link order", f"{consumer_id} does not follow {producer_id}"))
        if by_id[consumer_id].source_graph_id != by_id[producer_id].source_graph_id:
            out.append(ScheduleViolation("provenance mismatch",
                                         f"{consumer_id} does not reference the graph of {producer_id}"))

    base = 0
    for inst in s.instances:
        if cfg.unified:
            expected = Realization.UNIFIED_TEXT.value
        elif _is_interleaved(inst) and inst.instance_id in predecessor:
            expected = _root(inst.instance_id, predecessor, by_id).realization
        else:
            expected = native[inst.task].value if inst.task in native else inst.realization
        if inst.realization != expected:
            out.append(ScheduleViolation("realization",
                                         f"{inst.instance_id} uses {inst.realization}, expected {expected}"))
        if not _is_interleaved(inst):
            base += 1
            continue
        if inst.instance_id not in predecessor:
            out.append(ScheduleViolation("unlinked", f"interleaved instance {inst.instance_id} has no link"))
            continue
        root = _root(inst.instance_id, predecessor, by_id)
        if root.role != "generate":
            out.append(ScheduleViolation("trajectory", f"{inst.instance_id} does not trace to a generation"))
            continue
        try:
            problem = _check_consumer(inst, _graph_of(root))
        except (GSubError, ValueError, KeyError) as exc:
            problem = f"embedded graph unreadable: {exc}"
        if problem:
            out.append(ScheduleViolation("embedded-graph", f"{inst.instance_id}: {problem}"))

    interleaved = len(s.instances) - base
    expected_count = interleave_count(cfg.interleave_ratio, base) if cfg.interleaving else 0
    if interleaved != expected_count:
        out.append(ScheduleViolation("ratio", f"{interleaved} interleaved instances, expected {expected_count}"))
    return out


def _root(instance_id: str, predecessor: Mapping[str, str], by_id) -> TaskInstance:
    seen = set()
    while instance_id in predecessor and instance_id not in seen:
        seen.add(instance_id)
        instance_id = predecessor[instance_id]
    return by_id[instance_id]


def interleave_stats(s: TrainingSchedule) -> dict:
    violations = validate_schedule(s)
    if violations:
        raise InvalidScheduleError("; ".join(v.message for v in violations[:5]))
    instances = s.instances
    linked = {c for _, c in s.links}
    by_id = {i.instance_id: i for i in instances}
    predecessor = {c: p for p, c in s.links}
    lengths = Counter()
    for inst in instances:
        if inst.role == "generate":
            lengths[inst.instance_id] += 1
    for c in linked:
        lengths[_root(c, predecessor, by_id).instance_id] += 1
    histogram = Counter(lengths.values())
    return {
        "total": len(instances),
        "per_task": dict(sorted(Counter(i.task for i in instances).items())),
        "per_role": dict(sorted(Counter(i.role for i in instances).items())),
        "interleaved": len(linked),
        "interleaved_fraction": len(linked) / len(instances) if instances else 0.0,
        "trajectory_length_histogram": {str(k): histogram[k] for k in sorted(histogram)},
    }


# files ----------------------------------------------------------------------------

SCHEDULE_FILE = "schedule.jsonl"
LINKS_FILE = "links.jsonl"


def write_schedule(s: TrainingSchedule, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    sched_path, links_path = out_dir / SCHEDULE_FILE, out_dir / LINKS_FILE
    with atomic_write(sched_path) as fh:
        fh.write(dumps(s.header()) + "\n")
        for inst in s.instances:
            fh.write(dumps(inst.to_json()) + "\n")
    with atomic_write(links_path) as fh:
        for p, c in s.links:
            fh.write(dumps({"producer": p, "consumer": c}) + "\n")
    return [sched_path, links_path]


def read_schedule(out_dir) -> TrainingSchedule:
    out_dir = Path(out_dir)
    with open(out_dir / SCHEDULE_FILE, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        instances = [TaskInstance.from_json(json.loads(line)) for line in fh if line.strip()]
    cfg = header["config"]
    config = ParadigmConfig(**cfg)
    streams, start = [], 0
    for meta in header["streams"]:
        streams.append(instances[start:start + meta["count"]])
        start += meta["count"]
    links = []
    with open(out_dir / LINKS_FILE, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                row = json.loads(line)
                links.append((row["producer"], row["consumer"]))
    catalog = [TaskCatalogEntry(**e) for e in header.get("catalog", [])]
    return TrainingSchedule(config, streams, links, catalog)
