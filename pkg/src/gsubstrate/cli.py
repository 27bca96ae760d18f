"""``gsub`` command line.

Exit status is 0 on success, 1 on data errors and 2 on usage errors. Every
command that writes files also writes a run manifest beside its output, and
``gsub replay MANIFEST`` re-runs it and checks the output digests.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
from pathlib import Path

from . import __version__
from .corpus import DOMAIN_TASK, CorpusRecord, read_corpus
from .errors import EmptyCorpusError, GSubError, InvalidRecordError, UnknownModalityError
from .evaluate import EvalConfig, evaluate_files, report_json
from .forge import (
    PERTURB_OPS,
    TASKS,
    derive_seed,
    instance_from_record,
    make_consistency_instance,
    make_subgraph_instance,
    perturb,
    perturb_any,
)
from .ioutil import atomic_write, write_jsonl
from .manifest import MANIFEST_SUFFIX, RunManifest, check_digests, digests, read_manifest
from .schedule import (
    INTERLEAVE_KINDS,
    PARADIGMS,
    PLACEMENTS,
    ParadigmConfig,
    TaskCatalogEntry,
    balanced_labels,
    build_schedule,
    interleave_stats,
    validate_schedule,
    write_schedule,
)
from .schema_io import Realization, parse, serialize
from .stats import COUNT_MODES, corpus_stats, graph_stats

SEED_ENV = "GSUB_SEED"
REALIZATIONS = [r.value for r in Realization]


class UsageError(Exception):
    pass


def resolve_seed(seed: int) -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return seed
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _config_echo(args) -> dict:
    skip = {"func", "command"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _emit_manifest(args, argv, inputs, outputs, manifest_path) -> Path:
    m = RunManifest(
        command=args.command,
        argv=list(argv),
        config=_config_echo(args),
        seed=getattr(args, "seed", None),
        inputs=digests(inputs),
        outputs=digests(outputs),
    )
    return m.write(manifest_path)


def _manifest_beside(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + MANIFEST_SUFFIX)


# commands -------------------------------------------------------------------------


def cmd_validate(args, argv) -> int:
    if args.graph:
        text = Path(args.graph).read_text(encoding="utf-8")
        g = parse(text, args.realization)
        print(f"ok: {len(g.entities)} entities, {len(g.relations)} relations")
        return 0
    count = sum(1 for _ in read_corpus(args.input))
    print(f"ok: {count} records")
    return 0


def _realized_rows(path, realization: str):
    """Yield (line, row, graph) from a realized-graph JSONL file."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InvalidRecordError(lineno, exc.msg) from None
            if not isinstance(row, dict) or not isinstance(row.get("text"), str):
                raise InvalidRecordError(lineno, "realized graph lines need a string text field")
            if row.get("realization", realization) != realization:
                raise InvalidRecordError(lineno, f"line is {row['realization']}, expected {realization}")
            try:
                g = parse(row["text"], realization)
            except GSubError as exc:
                raise InvalidRecordError(lineno, str(exc)) from None
            yield lineno, row, g


_PASSTHROUGH = ("domain", "source", "target_text", "meta")


def cmd_convert(args, argv) -> int:
    src, dst = args.src, args.dst
    if args.single:
        if "corpus" in (src, dst):
            raise UsageError("--single converts one serialized graph; corpus is not a realization")
        g = parse(Path(args.input).read_text(encoding="utf-8"), src, dedupe=args.dedupe)
        with atomic_write(args.out) as fh:
            fh.write(serialize(g, dst))
    else:
        rows = []
        if src == "corpus":
            items = ((r.id, {k: v for k, v in r.to_json().items() if k in _PASSTHROUGH}, r.graph)
                     for r in read_corpus(args.input))
        else:
            items = ((row.get("id"), {k: row[k] for k in _PASSTHROUGH if k in row}, g)
                     for _, row, g in _realized_rows(args.input, src))
        for rid, extra, g in items:
            if dst == "corpus":
                data = {"id": rid, **extra, "graph": g.to_dict()}
                try:
                    rows.append(CorpusRecord.from_json(data).to_json())
                except ValueError as exc:
                    raise InvalidRecordError(len(rows) + 1, str(exc)) from None
            else:
                rows.append({"id": rid, **extra, "realization": dst, "text": serialize(g, dst)})
        write_jsonl(args.out, rows)
    _emit_manifest(args, argv, [args.input], [args.out], _manifest_beside(args.out))
    print(f"wrote {args.out}")
    return 0


def cmd_stats(args, argv) -> int:
    records = list(read_corpus(args.input))
    if not records:
        raise EmptyCorpusError(f"{args.input} has no records")
    report: dict = {"count_mode": args.count_mode,
                    "corpus": corpus_stats((r.graph for r in records), args.count_mode).to_dict()}
    if args.by_domain:
        domains = sorted({r.domain for r in records})
        report["by_domain"] = {
            d: corpus_stats((r.graph for r in records if r.domain == d), args.count_mode).to_dict()
            for d in domains
        }
    if args.per_graph:
        report["graphs"] = [graph_stats(r.graph, args.count_mode).to_dict() for r in records]
    text = json.dumps(report, ensure_ascii=False, indent=2) + "\n"
    if args.out:
        with atomic_write(args.out) as fh:
            fh.write(text)
        _emit_manifest(args, argv, [args.input], [args.out], _manifest_beside(args.out))
    else:
        sys.stdout.write(text)
    return 0


def cmd_forge(args, argv) -> int:
    records = list(read_corpus(args.input))
    if not records:
        raise EmptyCorpusError(f"{args.input} has no records")
    seed = args.seed
    labels = balanced_labels(len(records), args.positive_fraction,
                             random.Random(derive_seed(seed, "forge-labels", args.task)))
    rows, skipped = [], 0
    for rec, label in zip(records, labels):
        rseed = derive_seed(seed, "forge", args.task, rec.id)
        try:
            if args.task == "auto":
                inst = instance_from_record(rec, args.realization, rseed)
            elif args.task == "cc":
                if rec.source is None:
                    raise UnknownModalityError(f"record {rec.id} has no source for a consistency check")
                inst = make_consistency_instance(rec.source, rec.graph, label, rseed, args.realization,
                                                 instance_id=f"cc:{rec.id}",
                                                 source_graph_id=rec.graph.graph_id)
            elif args.task == "sr":
                inst = make_subgraph_instance(rec.graph, args.k, label, rseed, args.realization,
                                              instance_id=f"sr:{rec.id}",
                                              source_graph_id=rec.graph.graph_id)
            else:
                inst = instance_from_record(rec, args.realization, rseed, task=args.task)
        except GSubError as exc:
            if not args.skip_errors:
                raise
            print(f"skipped {rec.id}: {exc}", file=sys.stderr)
            skipped += 1
            continue
        rows.append(inst.to_json())
    write_jsonl(args.out, rows)
    _emit_manifest(args, argv, [args.input], [args.out], _manifest_beside(args.out))
    print(f"wrote {len(rows)} instances to {args.out} ({skipped} skipped)")
    return 0


def _parse_mix(text: str | None) -> dict[str, float]:
    if not text:
        return {k: 1 / 3 for k in INTERLEAVE_KINDS}
    mix = {}
    for part in text.split(","):
        key, sep, value = part.partition("=")
        if not sep:
            raise UsageError(f"--mix entries look like gar=0.5, got {part!r}")
        try:
            mix[key.strip()] = float(value)
        except ValueError:
            raise UsageError(f"--mix weight {value!r} is not a number") from None
    return mix


def load_catalog(path) -> tuple[list[TaskCatalogEntry], dict[str, list[CorpusRecord]], list[Path]]:
    """Read a catalog JSON file and the corpora it points at (paths relative to the catalog)."""
    path = Path(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    raw = data.get("entries", []) if isinstance(data, dict) else data
    entries, records, inputs = [], {}, [path]
    corpus_cache: dict[Path, list[CorpusRecord]] = {}
    for item in raw:
        try:
            entry = TaskCatalogEntry(**item)
        except (TypeError, ValueError) as exc:
            raise InvalidRecordError(0, f"catalog entry {item!r}: {exc}") from None
        ref = (path.parent / entry.corpus_ref) if entry.corpus_ref else None
        if ref is None:
            raise InvalidRecordError(0, f"catalog entry for {entry.task} has no corpus_ref")
        if ref not in corpus_cache:
            corpus_cache[ref] = list(read_corpus(ref))
            inputs.append(ref)
        records[entry.task] = [r for r in corpus_cache[ref] if DOMAIN_TASK[r.domain] == entry.task]
        entries.append(entry)
    return entries, records, inputs


def cmd_schedule(args, argv) -> int:
    try:
        config = ParadigmConfig(
            paradigm=args.paradigm, interleave_ratio=args.ratio, interleave_mix=_parse_mix(args.mix),
            seed=args.seed, placement=args.placement, chain_depth=args.chain_depth,
            cc_positive_fraction=args.cc_positive, sr_positive_fraction=args.sr_positive, sr_k=args.sr_k,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    entries, records, inputs = load_catalog(args.catalog)
    sched = build_schedule(entries, records, config)
    problems = validate_schedule(sched)
    if problems:
        raise GSubError("built schedule failed validation: " + "; ".join(p.message for p in problems[:3]))
    outputs = write_schedule(sched, args.out)
    _emit_manifest(args, argv, inputs, outputs, Path(args.out) / "manifest.json")
    print(json.dumps(interleave_stats(sched), sort_keys=True))
    return 0


def cmd_eval(args, argv) -> int:
    try:
        cfg = EvalConfig(task=args.task, k=args.k, beta=args.beta, bleu_mode=args.bleu_mode,
                         smoothing=args.smoothing, symmetric=args.symmetric)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    text = report_json(evaluate_files(args.pred, args.gold, cfg))
    if args.out:
        with atomic_write(args.out) as fh:
            fh.write(text)
        _emit_manifest(args, argv, [args.pred, args.gold], [args.out], _manifest_beside(args.out))
    else:
        sys.stdout.write(text)
    return 0


def cmd_perturb(args, argv) -> int:
    rows, skipped = [], 0
    for rec in read_corpus(args.input):
        rseed = derive_seed(args.seed, "perturb", rec.id)
        try:
            if args.op == "any":
                g, desc = perturb_any(rec.graph, rseed)
            else:
                g, desc = perturb(rec.graph, args.op, rseed)
        except GSubError as exc:
            if not args.skip_errors:
                raise
            print(f"skipped {rec.id}: {exc}", file=sys.stderr)
            skipped += 1
            continue
        rows.append({"id": rec.id, "graph": g.to_dict(), "perturbation": desc.to_json()})
    write_jsonl(args.out, rows)
    _emit_manifest(args, argv, [args.input], [args.out], _manifest_beside(args.out))
    print(f"wrote {len(rows)} perturbed graphs to {args.out} ({skipped} skipped)")
    return 0


def cmd_replay(args, argv) -> int:
    m = read_manifest(args.manifest)
    if m.command == "replay":
        raise UsageError("a replay manifest cannot be replayed")
    check_digests(m.inputs, "inputs")
    env_seed = os.environ.get(SEED_ENV)
    if m.seed is not None:
        os.environ[SEED_ENV] = str(m.seed)
    try:
        status = main(m.argv)
    finally:
        if env_seed is None:
            os.environ.pop(SEED_ENV, None)
        else:
            os.environ[SEED_ENV] = env_seed
    if status != 0:
        return status
    check_digests(m.outputs, "outputs")
    print(f"replay ok: {len(m.outputs)} outputs match")
    return 0


# parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gsub", description="Graph substrate data toolkit")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a corpus or a single serialized graph")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--in", dest="input", help="corpus JSONL")
    group.add_argument("--graph", help="one serialized graph file")
    p.add_argument("--realization", choices=REALIZATIONS, default="unified-text")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("convert", help="re-serialize graphs in another realization")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--from", dest="src", choices=REALIZATIONS + ["corpus"], required=True)
    p.add_argument("--to", dest="dst", choices=REALIZATIONS + ["corpus"], required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--single", action="store_true", help="input is one serialized graph, not JSONL")
    p.add_argument("--dedupe", action="store_true", help="keep the first of duplicate ids or triples")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("stats", help="structural statistics of a corpus")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--count-mode", choices=COUNT_MODES, default="node-triples")
    p.add_argument("--by-domain", action="store_true")
    p.add_argument("--per-graph", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("forge", help="forge task instances from corpus records")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--task", choices=("auto",) + TASKS, default="auto")
    p.add_argument("--realization", choices=REALIZATIONS, default="unified-text")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--positive-fraction", type=float, default=0.5)
    p.add_argument("--k", type=int, default=3, help="query size for subgraph retrieval")
    p.add_argument("--skip-errors", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_forge)

    p = sub.add_parser("schedule", help="build a training schedule")
    p.add_argument("--paradigm", required=True, type=str.lower, choices=[x.lower() for x in PARADIGMS])
    p.add_argument("--ratio", type=float, default=0.0)
    p.add_argument("--mix", help="interleave weights, e.g. gar=0.4,cc=0.3,sr=0.3")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--catalog", required=True)
    p.add_argument("--placement", choices=PLACEMENTS, default="adjacent")
    p.add_argument("--chain-depth", type=int, default=1)
    p.add_argument("--cc-positive", type=float, default=0.5)
    p.add_argument("--sr-positive", type=float, default=0.5)
    p.add_argument("--sr-k", type=int, default=3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("eval", help="grade predictions against gold instances")
    p.add_argument("--task", choices=TASKS)
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--k", type=int, default=50)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--bleu-mode", choices=("corpus", "sentence"), default="corpus")
    p.add_argument("--smoothing", action="store_true")
    p.add_argument("--symmetric", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("perturb", help="apply one controlled perturbation per graph")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--op", choices=PERTURB_OPS + ("any",), default="any")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--skip-errors", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("replay", help="re-run a command from its manifest and compare digests")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)
    return ap


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if hasattr(args, "seed") and args.command != "replay":
            args.seed = resolve_seed(args.seed)
        return args.func(args, argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"gsub: error: {exc}", file=sys.stderr)
        return 2
    except GSubError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: io-error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


run_command = main

if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
