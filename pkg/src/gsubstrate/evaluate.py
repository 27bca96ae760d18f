"""Grade a prediction file against forged gold instances."""

from __future__ import annotations

import json
import math
from collections.abc import Iterable, Sequence
from dataclasses import asdict, dataclass
from pathlib import Path

from .errors import GSubError, InvalidRecordError, MalformedPredictionFileError
from .forge import TASKS, TaskInstance
from .graph import GraphState
from .metrics import (
    UNPARSEABLE,
    accuracy,
    answers_match,
    bleu4,
    corpus_recall,
    f1_score,
    mean_recall_at_k,
    normalize_answer,
    normalize_triple,
    rank_scored,
    recall_at_k,
    rouge_l_corpus,
    tokenize,
)
from .schema_io import parse

WEIGHTED_TOLERANCE = 1e-6


@dataclass(frozen=True)
class Prediction:
    instance_id: str
    text: str = ""
    ranked_triples: tuple | None = None


@dataclass(frozen=True)
class EvalConfig:
    task: str | None = None
    k: int = 50
    beta: float = 1.0
    bleu_mode: str = "corpus"
    smoothing: bool = False
    symmetric: bool = False

    def __post_init__(self):
        if self.task is not None and self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.bleu_mode not in ("corpus", "sentence"):
            raise ValueError("bleu_mode must be corpus or sentence")


def _parse_prediction(data, lineno: int) -> Prediction:
    if not isinstance(data, dict):
        raise MalformedPredictionFileError(lineno, "prediction must be a JSON object")
    iid = data.get("instance_id")
    if not isinstance(iid, str) or not iid:
        raise MalformedPredictionFileError(lineno, "instance_id must be a nonempty string")
    text = data.get("text", "")
    if text is None:
        text = ""
    if not isinstance(text, str):
        raise MalformedPredictionFileError(lineno, "text must be a string")
    ranked = data.get("ranked_triples")
    if ranked is not None:
        if not isinstance(ranked, list):
            raise MalformedPredictionFileError(lineno, "ranked_triples must be a list")
        rows = []
        for j, row in enumerate(ranked):
            ok = (isinstance(row, list) and len(row) == 4
                  and all(isinstance(x, str) for x in row[:3])
                  and isinstance(row[3], (int, float)) and not isinstance(row[3], bool)
                  and math.isfinite(row[3]))
            if not ok:
                raise MalformedPredictionFileError(
                    lineno, f"ranked_triples[{j}] must be [subject, predicate, object, finite score]")
            rows.append(tuple(row))
        ranked = tuple(rows)
    return Prediction(iid, text, ranked)


def read_predictions(path) -> list[Prediction]:
    preds: list[Prediction] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedPredictionFileError(lineno, f"invalid JSON: {exc.msg}") from None
            pred = _parse_prediction(data, lineno)
            if pred.instance_id in seen:
                raise MalformedPredictionFileError(lineno, f"duplicate instance_id {pred.instance_id}")
            seen.add(pred.instance_id)
            preds.append(pred)
    return preds


def read_instances(path) -> list[TaskInstance]:
    """Read TaskInstance JSONL; a schedule header line, if present, is skipped."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
                if isinstance(data, dict) and "format" in data and "instance_id" not in data:
                    continue
                out.append(TaskInstance.from_json(data))
            except (ValueError, KeyError, TypeError) as exc:
                raise InvalidRecordError(lineno, f"not a task instance: {exc}") from None
    return out


# per-task grading ---------------------------------------------------------------


def _label_triples(g: GraphState, symmetric: bool) -> list[tuple[str, str, str]]:
    label = {e.id: e.label if e.label is not None else e.id for e in g.entities}
    return [normalize_triple((label[r.subject], r.predicate, label[r.object]), symmetric=symmetric)
            for r in g.relations]


def _predicted_graph_triples(text: str, realization: str, symmetric: bool) -> list | None:
    try:
        return _label_triples(parse(text, realization, dedupe=True), symmetric)
    except (GSubError, ValueError):
        return None


def _gar_payload(gold: dict):
    kind = gold["kind"]
    if kind == "shortest-path":
        return None if not gold.get("reachable") else gold["length"]
    if kind == "matching":
        return gold["size"]
    return gold["answer"]


def _rate(x: float) -> float:
    return round(x, 12)


def _grade_binary(insts, preds, kind):
    golds = {i.instance_id: bool(i.gold) for i in insts}
    texts = {iid: p.text for iid, p in preds.items()}
    unparseable = sum(1 for iid in golds
                      if iid in texts and normalize_answer(texts[iid], kind) is UNPARSEABLE)
    return {"count": len(golds), "accuracy": _rate(accuracy(texts, golds, kind)),
            "unparseable": unparseable}


def _grade_gar(insts, preds):
    by_kind: dict[str, list[TaskInstance]] = {}
    for inst in insts:
        by_kind.setdefault(inst.gold["kind"], []).append(inst)
    per_kind, correct, unparseable = {}, 0, 0
    for kind in sorted(by_kind):
        hits = 0
        for inst in by_kind[kind]:
            pred = preds.get(inst.instance_id)
            answer = normalize_answer(pred.text if pred else None, kind)
            if pred is not None and answer is UNPARSEABLE:
                unparseable += 1
            tol = WEIGHTED_TOLERANCE if kind == "shortest-path" and inst.gold.get("weighted") else 0.0
            hits += answers_match(answer, _gar_payload(inst.gold), tolerance=tol)
        per_kind[kind] = _rate(hits / len(by_kind[kind]))
        correct += hits
    return {"count": len(insts), "accuracy": per_kind, "overall": _rate(correct / len(insts)),
            "unparseable": unparseable}


def _grade_mgd(insts, preds, cfg: EvalConfig):
    cands = [tokenize(preds[i.instance_id].text) if i.instance_id in preds else [] for i in insts]
    refs = [tokenize(str(i.gold)) for i in insts]
    return {
        "count": len(insts),
        "bleu4": _rate(bleu4(cands, refs, mode=cfg.bleu_mode, smoothing=cfg.smoothing)),
        "rouge_l": _rate(rouge_l_corpus(cands, refs, beta=cfg.beta)),
        "empty_candidates": sum(1 for c in cands if not c),
    }


def _grade_sgg(insts, preds, cfg: EvalConfig):
    recalls, means, unparseable = [], [], 0
    for inst in insts:
        gold = set(_label_triples(parse(inst.gold, inst.realization), False))
        pred = preds.get(inst.instance_id)
        ranked: list = []
        if pred is not None and pred.ranked_triples is not None:
            ranked = [normalize_triple(t) for t in rank_scored(pred.ranked_triples)]
        elif pred is not None:
            parsed = _predicted_graph_triples(pred.text, inst.realization, False)
            if parsed is None:
                unparseable += 1
            ranked = parsed or []
        recalls.append(recall_at_k(ranked, gold, cfg.k))
        means.append(mean_recall_at_k(ranked, gold, cfg.k))
    return {"count": len(insts), "k": cfg.k,
            "recall_at_k": _rate(corpus_recall(recalls)),
            "mean_recall_at_k": _rate(corpus_recall(means)),
            "excluded_empty_gold": sum(1 for r in recalls if r is None),
            "unparseable": unparseable}


def _prf_block(hit: int, n_pred: int, n_gold: int) -> dict:
    p = hit / n_pred if n_pred else (1.0 if n_gold == 0 else 0.0)
    r = hit / n_gold if n_gold else (1.0 if n_pred == 0 else 0.0)
    return {"precision": _rate(p), "recall": _rate(r), "f1": _rate(f1_score(p, r))}


def _grade_ere(insts, preds, cfg: EvalConfig):
    """Micro-averaged P/R/F1 over all triples, plus one block per predicate."""
    totals = [0, 0, 0]
    per_rel: dict[str, list[int]] = {}
    unparseable = 0
    for inst in insts:
        gold = set(_label_triples(parse(inst.gold, inst.realization), cfg.symmetric))
        pred = preds.get(inst.instance_id)
        got: set = set()
        if pred is not None:
            parsed = _predicted_graph_triples(pred.text, inst.realization, cfg.symmetric)
            if parsed is None:
                unparseable += 1
            got = set(parsed or ())
        for bucket, triples in ((0, got & gold), (1, got), (2, gold)):
            totals[bucket] += len(triples)
            for t in triples:
                per_rel.setdefault(t[1], [0, 0, 0])[bucket] += 1
    block = {"count": len(insts), **_prf_block(*totals)}
    block["per_relation"] = {rel: _prf_block(*per_rel[rel]) for rel in sorted(per_rel)}
    block["unparseable"] = unparseable
    return block


def evaluate_run(predictions: Iterable[Prediction], gold_instances: Sequence[TaskInstance],
                 config: EvalConfig | None = None) -> dict:
    """Grade ``predictions`` and return the report as a plain JSON-ready dict."""
    cfg = config or EvalConfig()
    gold_ids: set[str] = set()
    for inst in gold_instances:
        if inst.instance_id in gold_ids:
            raise InvalidRecordError(0, f"duplicate gold instance id {inst.instance_id}")
        gold_ids.add(inst.instance_id)
    graded = [i for i in gold_instances if cfg.task is None or i.task == cfg.task]
    preds = {p.instance_id: p for p in predictions}
    by_task: dict[str, list[TaskInstance]] = {}
    for inst in graded:
        by_task.setdefault(inst.task, []).append(inst)

    tasks: dict[str, dict] = {}
    for task in sorted(by_task):
        insts = by_task[task]
        if task == "gar":
            tasks[task] = _grade_gar(insts, preds)
        elif task in ("cc", "sr"):
            tasks[task] = _grade_binary(insts, preds, task)
        elif task == "mgd":
            tasks[task] = _grade_mgd(insts, preds, cfg)
        elif task == "sgg":
            tasks[task] = _grade_sgg(insts, preds, cfg)
        else:
            tasks[task] = _grade_ere(insts, preds, cfg)

    graded_ids = {i.instance_id for i in graded}
    missing = sorted(graded_ids - set(preds))
    unmatched = sorted(set(preds) - gold_ids)
    return {
        "config": asdict(cfg),
        "counts": {
            "gold": len(graded),
            "predictions": len(preds),
            "matched": len(graded_ids & set(preds)),
            "missing": len(missing),
            "unmatched": len(unmatched),
        },
        "missing_ids": missing,
        "unmatched_ids": unmatched,
        "tasks": tasks,
    }


def report_json(report: dict) -> str:
    return json.dumps(report, ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def evaluate_files(pred_path, gold_path, config: EvalConfig | None = None) -> dict:
    return evaluate_run(read_predictions(Path(pred_path)), read_instances(Path(gold_path)), config)
