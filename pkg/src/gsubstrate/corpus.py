"""Corpus records: one graph per JSON line, with its source input and target text."""

from __future__ import annotations

import json
from collections.abc import Iterator
from dataclasses import dataclass, field

from .errors import CorpusParseError, GSubError, InvalidRecordError
from .graph import GraphState, validate
from .ioutil import write_jsonl

DOMAINS = ("algorithm", "molecule", "scene", "event")
DOMAIN_TASK = {"algorithm": "gar", "molecule": "mgd", "scene": "sgg", "event": "ere"}
SOURCE_KINDS = ("text", "image_ref", "smiles")


@dataclass(frozen=True)
class Source:
    kind: str
    value: str

    def __post_init__(self):
        if self.kind not in SOURCE_KINDS:
            raise ValueError(f"source kind must be one of {SOURCE_KINDS}, got {self.kind!r}")

    def to_json(self) -> dict:
        return {self.kind: self.value}

    @classmethod
    def from_json(cls, data) -> Source:
        if not isinstance(data, dict) or len(data) != 1:
            raise ValueError("source must be an object with exactly one of " + ", ".join(SOURCE_KINDS))
        (kind, value), = data.items()
        if not isinstance(value, str):
            raise ValueError(f"source {kind} must be a string")
        return cls(kind, value)


@dataclass(frozen=True)
class CorpusRecord:
    id: str
    domain: str
    graph: GraphState
    source: Source | None = None
    target_text: str | None = None
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"id": self.id, "domain": self.domain, "graph": self.graph.to_dict()}
        if self.source is not None:
            out["source"] = self.source.to_json()
        if self.target_text is not None:
            out["target_text"] = self.target_text
        if self.meta:
            out["meta"] = self.meta
        return out

    @classmethod
    def from_json(cls, data) -> CorpusRecord:
        """Build and validate a record; raises ``ValueError`` describing the first problem.

        A graph without ``graph_id`` takes the record id.
        """
        if not isinstance(data, dict):
            raise ValueError("record must be a JSON object")
        rid = data.get("id")
        if not isinstance(rid, str) or not rid:
            raise ValueError("record needs a nonempty string id")
        domain = data.get("domain")
        if domain not in DOMAINS:
            raise ValueError(f"domain must be one of {DOMAINS}, got {domain!r}")
        g = GraphState.from_dict(data.get("graph"))
        if g.graph_id is None:
            g = GraphState(g.entities, g.relations, rid)
        violations = validate(g)
        if violations:
            raise ValueError(violations[0].message)
        source = Source.from_json(data["source"]) if data.get("source") is not None else None
        target = data.get("target_text")
        if target is not None and not isinstance(target, str):
            raise ValueError("target_text must be a string")
        meta = data.get("meta") or {}
        if not isinstance(meta, dict):
            raise ValueError("meta must be an object")
        return cls(rid, domain, g, source, target, meta)


def read_corpus(path) -> Iterator[CorpusRecord]:
    """Stream validated records from a JSONL file; errors carry the 1-based line number."""
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusParseError(lineno, exc.msg) from None
            try:
                record = CorpusRecord.from_json(data)
            except (ValueError, GSubError) as exc:
                raise InvalidRecordError(lineno, str(exc)) from None
            if record.id in seen:
                raise InvalidRecordError(lineno, f"duplicate record id {record.id}")
            seen.add(record.id)
            yield record


def write_corpus(path, records) -> None:
    write_jsonl(path, (r.to_json() for r in records))
