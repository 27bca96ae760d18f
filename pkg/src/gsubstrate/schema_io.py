"""Text realizations of a graph state and their inverse parsers.

Four realizations are supported:

``unified-text``
    A line-oriented format::

        [entities]
        E1: horse
        E2: fence {color=brown}
        [relations]
        (E1, on, E2)

    Labels, predicates and attribute keys/values that contain delimiter
    characters are written as double-quoted strings with backslash escapes.
    Line breaks inside a label cannot be represented.

``xml-style``
    ``<graph>`` root with ``<entity>``/``<relation>`` children and nested
    ``<attr key value/>`` elements, standard XML 1.0 escaping.

``natural-language``
    Template sentences, one per entity and relation, on a single line.

``canonical-json``
    The JSON object form of :meth:`GraphState.to_dict`.

Every realization is invertible: ``parse(serialize(g, r), r)`` is
structurally equal to ``g``.
"""

from __future__ import annotations

import json
import re
import xml.etree.ElementTree as ET
from enum import Enum

from .errors import SchemaSemanticError, SchemaSyntaxError, UnrepresentableLabelError
from .graph import Entity, GraphState, Relation, require_valid, validate


class Realization(str, Enum):
    UNIFIED_TEXT = "unified-text"
    XML_STYLE = "xml-style"
    NATURAL_LANGUAGE = "natural-language"
    CANONICAL_JSON = "canonical-json"

    def __str__(self) -> str:
        return self.value


def as_realization(value) -> Realization:
    try:
        return Realization(value)
    except ValueError:
        raise ValueError(
            f"unknown realization {value!r}; expected one of {[r.value for r in Realization]}"
        ) from None


def serialize(g: GraphState, realization) -> str:
    require_valid(g)
    realization = as_realization(realization)
    entities = sorted(g.entities, key=lambda e: e.id)
    relations = sorted(g.relations, key=lambda r: r.triple)
    if realization is Realization.UNIFIED_TEXT:
        return _ut_serialize(entities, relations)
    if realization is Realization.XML_STYLE:
        return _xml_serialize(entities, relations)
    if realization is Realization.NATURAL_LANGUAGE:
        return _nl_serialize(entities, relations)
    return json.dumps(g.to_dict(), ensure_ascii=False, separators=(",", ":"))


def parse(text: str, realization, *, dedupe: bool = False) -> GraphState:
    """Parse ``text`` in the given realization and return a validated graph.

    With ``dedupe=True`` repeated entity ids and repeated triples are dropped
    (first occurrence wins) instead of raising.
    """
    realization = as_realization(realization)
    if realization is Realization.UNIFIED_TEXT:
        entities, relations, graph_id = _ut_parse(text)
    elif realization is Realization.XML_STYLE:
        entities, relations, graph_id = _xml_parse(text)
    elif realization is Realization.NATURAL_LANGUAGE:
        entities, relations, graph_id = _nl_parse(text)
    else:
        entities, relations, graph_id = _json_parse(text)
    if dedupe:
        entities = _first_by(entities, lambda e: e.id)
        relations = _first_by(relations, lambda r: r.triple)
    g = GraphState(tuple(entities), tuple(relations), graph_id)
    violations = validate(g)
    if violations:
        first = violations[0]
        if first.rule in ("dangling-subject", "dangling-object"):
            missing = first.message.rsplit(" ", 1)[-1]
            raise SchemaSemanticError(f"undeclared entity {missing}", violations=violations)
        raise SchemaSemanticError(first.message, violations=violations)
    return g


def _first_by(items, key):
    seen = set()
    out = []
    for item in items:
        k = key(item)
        if k not in seen:
            seen.add(k)
            out.append(item)
    return out


# shared cursor ------------------------------------------------------------


class _Cursor:
    def __init__(self, text: str, line: int = 1, col0: int = 0):
        self.text = text
        self.pos = 0
        self.line = line
        self.col0 = col0

    def where(self, pos: int | None = None) -> tuple[int, int]:
        pos = self.pos if pos is None else pos
        before = self.text[:pos]
        line = self.line + before.count("\n")
        nl = before.rfind("\n")
        col = (pos - nl) if nl >= 0 else pos + 1 + self.col0
        return line, col

    def fail(self, message: str, expected: str | None = None):
        raise SchemaSyntaxError(message, self.where(), expected)

    def at_end(self) -> bool:
        return self.pos >= len(self.text)

    def startswith(self, literal: str) -> bool:
        return self.text.startswith(literal, self.pos)

    def expect(self, literal: str):
        if not self.startswith(literal):
            found = self.text[self.pos:self.pos + len(literal)] or "end of input"
            self.fail(f"unexpected {found!r}", repr(literal))
        self.pos += len(literal)

    def read_quoted(self, escapes: dict[str, str]) -> str:
        self.expect('"')
        out = []
        while True:
            if self.at_end():
                self.fail("unterminated string", '"')
            c = self.text[self.pos]
            if c == '"':
                self.pos += 1
                return "".join(out)
            if c == "\\":
                nxt = self.text[self.pos + 1:self.pos + 2]
                if nxt not in escapes:
                    self.fail(f"bad escape \\{nxt}", "one of " + " ".join("\\" + k for k in escapes))
                out.append(escapes[nxt])
                self.pos += 2
                continue
            if c == "\n":
                self.fail("line break inside string", '"')
            out.append(c)
            self.pos += 1

    def read_until(self, stops: str, what: str) -> str:
        start = self.pos
        while not self.at_end() and self.text[self.pos] not in stops:
            self.pos += 1
        if self.pos == start:
            self.fail(f"empty {what}", what)
        return self.text[start:self.pos]

    def read_token(self, what: str) -> str:
        start = self.pos
        while not self.at_end() and not self.text[self.pos].isspace():
            self.pos += 1
        if self.pos == start:
            self.fail(f"missing {what}", what)
        return self.text[start:self.pos]


# unified-text -------------------------------------------------------------

_UT_SPECIAL = set('(),:"{}=\\')
_UT_ESCAPES = {"\\": "\\", '"': '"'}


def _ut_quote(value: str, what: str) -> str:
    if "\n" in value or "\r" in value:
        raise UnrepresentableLabelError(f"{what} {value!r} contains a line break")
    if value == "" or value != value.strip() or any(c in _UT_SPECIAL for c in value):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    return value


def _ut_attrs(attrs) -> str:
    if not attrs:
        return ""
    body = ", ".join(
        f"{_ut_quote(k, 'attribute key')}={_ut_quote(v, 'attribute value')}" for k, v in sorted(attrs)
    )
    return " {" + body + "}"


def _ut_serialize(entities, relations) -> str:
    lines = ["[entities]"]
    for e in entities:
        line = e.id
        if e.label is not None:
            line += ": " + _ut_quote(e.label, "label")
        lines.append(line + _ut_attrs(e.attrs))
    lines.append("[relations]")
    for r in relations:
        pred = _ut_quote(r.predicate, "predicate")
        lines.append(f"({r.subject}, {pred}, {r.object}){_ut_attrs(r.attrs)}")
    return "\n".join(lines) + "\n"


def _ut_parse(text: str):
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if lines and lines[0] == "[entities]":
        # ids never start with "(", so the last "[relations]" line is the header
        header = max((i for i, ln in enumerate(lines) if ln == "[relations]" and i > 0), default=None)
        if header is None:
            raise SchemaSyntaxError("missing relations section", (len(lines) + 1, 1), "'[relations]'")
        entity_lines = list(enumerate(lines[1:header], start=2))
        relation_lines = list(enumerate(lines[header + 1:], start=header + 2))
    elif all(ln.startswith("(") for ln in lines):
        entity_lines = []
        relation_lines = list(enumerate(lines, start=1))
    else:
        raise SchemaSyntaxError(f"unexpected {lines[0]!r}", (1, 1), "'[entities]'")

    entities = [_ut_entity_line(_Cursor(ln, line=no)) for no, ln in entity_lines]
    relations = [_ut_relation_line(_Cursor(ln, line=no)) for no, ln in relation_lines]
    return entities, relations, None


def _ut_value(cur: _Cursor, stops: str, what: str) -> str:
    if cur.startswith('"'):
        return cur.read_quoted(_UT_ESCAPES)
    return cur.read_until(stops, what)


def _ut_attr_block(cur: _Cursor):
    attrs = []
    if cur.at_end():
        return attrs
    cur.expect(" {")
    while True:
        key = _ut_value(cur, "=", "attribute key")
        cur.expect("=")
        value = _ut_value(cur, ",}", "attribute value")
        attrs.append((key, value))
        if cur.startswith(", "):
            cur.pos += 2
            continue
        cur.expect("}")
        break
    if not cur.at_end():
        cur.fail("trailing characters", "end of line")
    return attrs


def _ut_entity_line(cur: _Cursor) -> Entity:
    if cur.startswith("("):
        cur.fail("relation line in entity section", "entity id")
    start = cur.pos
    while not cur.at_end() and not cur.text[cur.pos].isspace() and cur.text[cur.pos] != ":":
        cur.pos += 1
    if cur.pos == start:
        cur.fail("missing entity id", "entity id")
    entity_id = cur.text[start:cur.pos]
    label = None
    if cur.startswith(": "):
        cur.pos += 2
        if cur.startswith('"'):
            label = cur.read_quoted(_UT_ESCAPES)
        else:
            end = cur.text.find(" {", cur.pos)
            end = len(cur.text) if end < 0 else end
            label = cur.text[cur.pos:end]
            if not label:
                cur.fail("empty label", "label")
            cur.pos = end
    return Entity(entity_id, label, _ut_attr_block(cur))


def _ut_relation_line(cur: _Cursor) -> Relation:
    cur.expect("(")
    subject = cur.read_until(",", "subject id")
    cur.expect(", ")
    predicate = _ut_value(cur, ",", "predicate")
    cur.expect(", ")
    obj = cur.read_until(")", "object id")
    cur.expect(")")
    return Relation(subject, predicate, obj, _ut_attr_block(cur))


# xml-style ----------------------------------------------------------------


def _xml_char_ok(c: str) -> bool:
    o = ord(c)
    return (
        o in (0x9, 0xA, 0xD)
        or 0x20 <= o <= 0xD7FF
        or 0xE000 <= o <= 0xFFFD
        or 0x10000 <= o <= 0x10FFFF
    )


_XML_ESCAPES = {"&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;",
                "\n": "&#10;", "\r": "&#13;", "\t": "&#9;"}


def _xml_attr(value: str) -> str:
    for c in value:
        if not _xml_char_ok(c):
            raise UnrepresentableLabelError(f"{value!r} contains a character XML 1.0 cannot carry")
    return "".join(_XML_ESCAPES.get(c, c) for c in value)


def _xml_attr_children(attrs) -> str:
    return "".join(f'<attr key="{_xml_attr(k)}" value="{_xml_attr(v)}"/>' for k, v in sorted(attrs))


def _xml_serialize(entities, relations) -> str:
    parts = ["<graph>"]
    for e in entities:
        head = f'<entity id="{_xml_attr(e.id)}"'
        if e.label is not None:
            head += f' label="{_xml_attr(e.label)}"'
        parts.append(f"{head}>{_xml_attr_children(e.attrs)}</entity>" if e.attrs else head + "/>")
    for r in relations:
        head = (f'<relation subject="{_xml_attr(r.subject)}" predicate="{_xml_attr(r.predicate)}" '
                f'object="{_xml_attr(r.object)}"')
        parts.append(f"{head}>{_xml_attr_children(r.attrs)}</relation>" if r.attrs else head + "/>")
    parts.append("</graph>")
    return "".join(parts)


def _xml_check(el: ET.Element, path: str, required: tuple[str, ...], optional: tuple[str, ...] = ()):
    for key in required:
        if key not in el.attrib:
            raise SchemaSyntaxError(f"<{el.tag}> lacks attribute {key!r}", path, key)
    extra = set(el.attrib) - set(required) - set(optional)
    if extra:
        raise SchemaSyntaxError(f"<{el.tag}> has unknown attributes {sorted(extra)}", path,
                                " ".join(required + optional))
    if (el.text or "").strip() or (el.tail or "").strip():
        raise SchemaSyntaxError(f"text content in <{el.tag}>", path, "element")


def _xml_attrs(el: ET.Element, path: str):
    attrs = []
    for j, child in enumerate(el):
        cpath = f"{path}/attr[{j}]"
        if child.tag != "attr":
            raise SchemaSyntaxError(f"unexpected <{child.tag}>", cpath, "<attr>")
        _xml_check(child, cpath, ("key", "value"))
        if len(child):
            raise SchemaSyntaxError("<attr> cannot have children", cpath, "/>")
        attrs.append((child.attrib["key"], child.attrib["value"]))
    return attrs


def _xml_parse(text: str):
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise SchemaSyntaxError(str(exc), getattr(exc, "position", None), "well-formed XML") from None
    if root.tag != "graph":
        raise SchemaSyntaxError(f"root element <{root.tag}>", "/", "<graph>")
    _xml_check(root, "/graph", ())
    entities, relations = [], []
    for i, el in enumerate(root):
        path = f"/graph/{el.tag}[{i}]"
        if el.tag == "entity":
            _xml_check(el, path, ("id",), ("label",))
            entities.append(Entity(el.attrib["id"], el.attrib.get("label"), _xml_attrs(el, path)))
        elif el.tag == "relation":
            _xml_check(el, path, ("subject", "predicate", "object"))
            relations.append(Relation(el.attrib["subject"], el.attrib["predicate"],
                                      el.attrib["object"], _xml_attrs(el, path)))
        else:
            raise SchemaSyntaxError(f"unexpected <{el.tag}>", path, "<entity> or <relation>")
    return entities, relations, None


# natural-language ---------------------------------------------------------

_NL_ESCAPES = {"\\": "\\", '"': '"', "n": "\n", "r": "\r"}
_NL_ATTR_AHEAD = re.compile(r' with (?:"(?:[^"\\]|\\.)*"|[^\s"]+) "')


def _nl_quote(value: str) -> str:
    body = value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\r", "\\r")
    return f'"{body}"'


def _nl_key(key: str) -> str:
    if not key or any(c.isspace() or c in '"\\,' for c in key):
        return _nl_quote(key)
    return key


def _nl_attrs(attrs) -> str:
    if not attrs:
        return ""
    return " with " + ", ".join(f"{_nl_key(k)} {_nl_quote(v)}" for k, v in sorted(attrs))


def _nl_serialize(entities, relations) -> str:
    sentences = []
    for e in entities:
        s = f"Entity {e.id}"
        if e.label is not None:
            s += f" is a {_nl_quote(e.label)}"
        sentences.append(s + _nl_attrs(e.attrs) + ".")
    for r in relations:
        sentences.append(
            f"{r.subject} has relation {_nl_quote(r.predicate)} to {r.object}{_nl_attrs(r.attrs)}."
        )
    return " ".join(sentences) + "\n"


def _nl_id(cur: _Cursor, follow: tuple[str, ...]) -> tuple[str, bool]:
    """Read an id; returns (id, sentence_ended)."""
    start = cur.pos
    token = cur.read_token("entity id")
    for lit in follow:
        if cur.startswith(lit):
            return token, False
    if _NL_ATTR_AHEAD.match(cur.text, cur.pos):
        return token, False
    if len(token) > 1 and token.endswith("."):
        return token[:-1], True
    cur.pos = start
    cur.fail(f"cannot end sentence after {token!r}", "'.'")


def _nl_attr_clause(cur: _Cursor):
    attrs = []
    if not cur.startswith(" with "):
        cur.expect(".")
        return attrs
    cur.pos += len(" with ")
    while True:
        if cur.startswith('"'):
            key = cur.read_quoted(_NL_ESCAPES)
        else:
            key = cur.read_token("attribute key")
        cur.expect(" ")
        attrs.append((key, cur.read_quoted(_NL_ESCAPES)))
        if cur.startswith(", "):
            cur.pos += 2
            continue
        cur.expect(".")
        return attrs


def _nl_parse(text: str):
    cur = _Cursor(text)
    entities, relations = [], []
    if text in ("", "\n"):
        return entities, relations, None
    while True:
        is_entity = cur.startswith("Entity ") and not cur.startswith("Entity has relation \"")
        if is_entity:
            cur.pos += len("Entity ")
            entity_id, ended = _nl_id(cur, (" is a ",))
            label, attrs = None, []
            if not ended:
                if cur.startswith(" is a "):
                    cur.pos += len(" is a ")
                    label = cur.read_quoted(_NL_ESCAPES)
                attrs = _nl_attr_clause(cur)
            entities.append(Entity(entity_id, label, attrs))
        else:
            subject = cur.read_token("subject id")
            cur.expect(" has relation ")
            predicate = cur.read_quoted(_NL_ESCAPES)
            cur.expect(" to ")
            obj, ended = _nl_id(cur, ())
            attrs = [] if ended else _nl_attr_clause(cur)
            relations.append(Relation(subject, predicate, obj, attrs))
        if cur.startswith(" "):
            cur.pos += 1
            continue
        if cur.text[cur.pos:] in ("\n", ""):
            break
        cur.fail("unexpected text after sentence", "' ' or end of input")
    return entities, relations, None


# canonical-json -----------------------------------------------------------


def _no_duplicate_keys(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ValueError(f"duplicate key {k!r}")
        out[k] = v
    return out


def _json_parse(text: str):
    try:
        data = json.loads(text, object_pairs_hook=_no_duplicate_keys)
    except json.JSONDecodeError as exc:
        raise SchemaSyntaxError(exc.msg, (exc.lineno, exc.colno), "JSON value") from None
    except ValueError as exc:
        raise SchemaSyntaxError(str(exc), "$", "unique keys") from None
    g = GraphState.from_dict(data)
    return list(g.entities), list(g.relations), g.graph_id
