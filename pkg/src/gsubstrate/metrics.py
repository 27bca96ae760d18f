"""Task metrics: answer accuracy, triple P/R/F1, R@K / mR@K, BLEU-4 and ROUGE-L."""

from __future__ import annotations

import math
import re
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from decimal import Decimal
from fractions import Fraction

from .errors import EmptyCandidateCorpusError, EmptyGoldCorpusError

_TOKEN_RE = re.compile(r"[^\W_]+|[^\w\s]|_")
_NUMBER_RE = re.compile(r"(?<![\w.])[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?")

BOOLEAN_WORDS = {
    "yes": True, "true": True, "no": False, "false": False,
}
# extra verdict words for the two binary understanding tasks
TASK_WORDS = {
    "cc": {"consistent": True, "inconsistent": False},
    "sr": {"present": True, "absent": False},
}
BOOLEAN_KINDS = ("connectivity", "cycle", "cc", "sr")
NUMERIC_KINDS = ("shortest-path", "matching")


class _Unparseable:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNPARSEABLE"

    def __bool__(self):
        return False


UNPARSEABLE = _Unparseable()
UNREACHABLE = None


def tokenize(text: str) -> list[str]:
    """Lowercase, then split into maximal alphanumeric runs and single punctuation marks."""
    return _TOKEN_RE.findall(text.lower())


def _last_match(pattern: re.Pattern, text: str):
    last = None
    for m in pattern.finditer(text):
        last = m
    return last


def normalize_answer(text: str | None, kind: str):
    """Extract the canonical answer a free-text prediction commits to.

    Booleans take the last verdict word; numbers take the last decimal
    literal. Shortest-path answers may also say ``unreachable`` (returned as
    ``None``) and whichever of the two appears last wins. Anything else is
    ``UNPARSEABLE``.
    """
    if text is None:
        return UNPARSEABLE
    if kind in BOOLEAN_KINDS:
        words = dict(BOOLEAN_WORDS)
        words.update(TASK_WORDS.get(kind, {}))
        pattern = re.compile(r"\b(" + "|".join(sorted(words, key=len, reverse=True)) + r")\b", re.IGNORECASE)
        m = _last_match(pattern, text)
        return UNPARSEABLE if m is None else words[m.group(1).lower()]
    if kind in NUMERIC_KINDS:
        num = _last_match(_NUMBER_RE, text)
        unreachable = None
        if kind == "shortest-path":
            unreachable = _last_match(re.compile(r"\b(?:unreachable|no path)\b", re.IGNORECASE), text)
        if unreachable is not None and (num is None or unreachable.start() > num.start()):
            return UNREACHABLE
        if num is None:
            return UNPARSEABLE
        return Fraction(Decimal(num.group(0)))
    raise ValueError(f"no answer normalization for kind {kind!r}")


def answers_match(predicted, gold, *, tolerance: float = 0.0) -> bool:
    if predicted is UNPARSEABLE:
        return False
    if isinstance(gold, bool) or gold is None:
        return predicted is gold
    if predicted is None or isinstance(predicted, bool):
        return False
    if tolerance:
        return abs(float(Fraction(predicted) - Fraction(gold))) <= tolerance
    return Fraction(predicted) == Fraction(gold)


def accuracy(predictions: Mapping[str, str], golds: Mapping[str, object], kind: str, *,
             tolerance: float = 0.0) -> float:
    """Share of gold ids whose prediction normalizes to the gold payload.

    Ids without a prediction count as wrong.
    """
    if not golds:
        raise EmptyGoldCorpusError("no gold instances to grade")
    correct = sum(
        1 for iid, gold in golds.items()
        if answers_match(normalize_answer(predictions.get(iid), kind), gold, tolerance=tolerance)
    )
    return correct / len(golds)


# triples ------------------------------------------------------------------------

def normalize_label(text: str) -> str:
    return " ".join(text.split()).lower()


def normalize_triple(triple: Sequence[str], *, symmetric: bool = False) -> tuple[str, str, str]:
    s, p, o = (normalize_label(x) for x in triple[:3])
    if symmetric and o < s:
        s, o = o, s
    return (s, p, o)


def _safe_div(num: int, den: int, empty: float) -> float:
    return num / den if den else empty


def f1_score(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def triple_prf(pred: Iterable, gold: Iterable) -> tuple[float, float, float]:
    pred, gold = set(pred), set(gold)
    hit = len(pred & gold)
    p = _safe_div(hit, len(pred), 1.0 if not gold else 0.0)
    r = _safe_div(hit, len(gold), 1.0 if not pred else 0.0)
    return p, r, f1_score(p, r)


# ranking ------------------------------------------------------------------------

def rank_scored(scored: Sequence[Sequence]) -> list[tuple]:
    """Order (s, p, o, score) rows by descending score, keeping input order on ties."""
    order = sorted(range(len(scored)), key=lambda i: -float(scored[i][3]))
    return [tuple(scored[i][:3]) for i in order]


def recall_at_k(ranked: Sequence, gold: Iterable, k: int) -> float | None:
    """Recall of ``gold`` within the first ``k`` ranked triples; None when gold is empty."""
    if k < 1:
        raise ValueError("k must be >= 1")
    gold = set(gold)
    if not gold:
        return None
    return len(set(ranked[:k]) & gold) / len(gold)


def mean_recall_at_k(ranked: Sequence, gold: Iterable, k: int) -> float | None:
    """Per-predicate recall within the top ``k``, averaged over predicates present in gold."""
    if k < 1:
        raise ValueError("k must be >= 1")
    gold = set(gold)
    if not gold:
        return None
    top = set(ranked[:k])
    by_class: dict[str, list] = {}
    for t in gold:
        by_class.setdefault(t[1], []).append(t)
    recalls = [sum(1 for t in ts if t in top) / len(ts) for ts in by_class.values()]
    return sum(recalls) / len(recalls)


def corpus_recall(per_instance: Iterable[float | None]) -> float:
    values = [v for v in per_instance if v is not None]
    if not values:
        raise EmptyGoldCorpusError("every instance has an empty gold set")
    return math.fsum(values) / len(values)


# text generation ----------------------------------------------------------------

def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _as_reference_list(ref) -> list[list[str]]:
    if ref and isinstance(ref[0], (list, tuple)):
        return [list(r) for r in ref]
    return [list(ref)]


def _closest_ref_len(cand_len: int, refs: list[list[str]]) -> int:
    return min((abs(len(r) - cand_len), len(r)) for r in refs)[1]


def _bleu_counts(cand: Sequence[str], refs: list[list[str]], max_n: int):
    hits, totals = [], []
    for n in range(1, max_n + 1):
        counts = _ngrams(cand, n)
        best: Counter = Counter()
        for r in refs:
            best |= _ngrams(r, n)
        hits.append(sum(min(c, best[g]) for g, c in counts.items()))
        totals.append(max(len(cand) - n + 1, 0))
    return hits, totals


def _bleu_from_counts(hits, totals, cand_len, ref_len, smoothing: bool) -> float:
    if cand_len == 0:
        return 0.0
    log_sum = 0.0
    for n, (h, t) in enumerate(zip(hits, totals), start=1):
        if smoothing and n >= 2:
            h, t = h + 1, t + 1
        if h == 0 or t == 0:
            return 0.0
        log_sum += math.log(h / t)
    bp = math.exp(min(0.0, 1 - ref_len / cand_len))
    return bp * math.exp(log_sum / len(hits))


def bleu4(candidates: Sequence[Sequence[str]], references: Sequence, *, mode: str = "corpus",
          smoothing: bool = False, max_n: int = 4) -> float:
    """BLEU over token lists.

    ``references[i]`` is a token list or a list of alternative token lists.
    Corpus mode pools clipped counts and lengths before combining; sentence
    mode averages per-candidate scores, with optional add-one smoothing for
    n >= 2.
    """
    if not candidates:
        raise EmptyCandidateCorpusError("no candidates to score")
    if len(candidates) != len(references):
        raise ValueError("candidates and references differ in length")
    if mode not in ("corpus", "sentence"):
        raise ValueError("mode must be corpus or sentence")
    rows = []
    for cand, ref in zip(candidates, references):
        refs = _as_reference_list(ref)
        hits, totals = _bleu_counts(cand, refs, max_n)
        rows.append((hits, totals, len(cand), _closest_ref_len(len(cand), refs)))
    if mode == "sentence":
        return math.fsum(_bleu_from_counts(*row, smoothing) for row in rows) / len(rows)
    hits = [sum(row[0][i] for row in rows) for i in range(max_n)]
    totals = [sum(row[1][i] for row in rows) for i in range(max_n)]
    cand_len = sum(row[2] for row in rows)
    ref_len = sum(row[3] for row in rows)
    return _bleu_from_counts(hits, totals, cand_len, ref_len, smoothing)


def lcs_length(a: Sequence, b: Sequence) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: Sequence[str], references, *, beta: float = 1.0) -> float:
    best = 0.0
    for ref in _as_reference_list(references):
        if not candidate or not ref:
            continue
        lcs = lcs_length(candidate, ref)
        if lcs == 0:
            continue
        p, r = lcs / len(candidate), lcs / len(ref)
        b2 = beta * beta
        best = max(best, (1 + b2) * p * r / (r + b2 * p))
    return best


def rouge_l_corpus(candidates: Sequence[Sequence[str]], references: Sequence, *, beta: float = 1.0) -> float:
    if not candidates:
        raise EmptyCandidateCorpusError("no candidates to score")
    if len(candidates) != len(references):
        raise ValueError("candidates and references differ in length")
    return math.fsum(rouge_l(c, r, beta=beta) for c, r in zip(candidates, references)) / len(candidates)
