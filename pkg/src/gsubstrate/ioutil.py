"""File helpers: deterministic JSON lines, atomic writes, digests."""

from __future__ import annotations

import hashlib
import json
import os
from contextlib import contextmanager
from pathlib import Path


def dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


@contextmanager
def atomic_write(path: str | os.PathLike):
    """Write to ``<path>.partial`` and rename on success.

    On error the ``.partial`` file is left behind and ``path`` is untouched.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    partial = path.with_name(path.name + ".partial")
    with open(partial, "w", encoding="utf-8", newline="\n") as fh:
        yield fh
    os.replace(partial, path)


def write_jsonl(path, rows) -> None:
    with atomic_write(path) as fh:
        for row in rows:
            fh.write(dumps(row) + "\n")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
