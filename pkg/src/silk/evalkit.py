"""Exact-match keyphrase evaluation: F1@M, F1@k with padding, present and
absent splits, dataset statistics, paired significance testing and
silver-overlap counting.

Gold and predicted phrases are compared on Porter stem keys after
duplicate removal. A gold phrase is "present" when its stems occur as a
contiguous run in the source text (title + ". " + abstract), "absent"
otherwise. F1@k pads short predictions arithmetically: the precision
denominator is k.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from . import textproc

DEFAULT_KS = (5, 10)
SPLITS = ("all", "present", "absent")


class EvalError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledDoc:
    doc_id: str
    title: str
    abstract: str
    gold: tuple[str, ...]
    pred: tuple[str, ...] = ()

    @property
    def text(self) -> str:
        return self.title + ". " + self.abstract


@dataclass
class EvalReport:
    ks: tuple[int, ...]
    per_doc: list[tuple[str, dict[str, float | None]]] = field(default_factory=list)
    aggregate: dict[str, float] = field(default_factory=dict)
    significance: tuple[float, float, int] | None = None

    def metric_keys(self) -> list[str]:
        names = ["f1@M"] + [f"f1@{k}" for k in self.ks]
        return [f"{split}/{name}" for name in names for split in SPLITS]

    def to_json(self) -> dict:
        out = {
            "aggregate": {k: self.aggregate.get(k) for k in self.metric_keys()},
            "per_doc": [
                {"id": doc_id, **{k: v for k, v in scores.items()}}
                for doc_id, scores in self.per_doc
            ],
        }
        if self.significance is not None:
            t, p, df = self.significance
            out["significance"] = {"t_statistic": t, "p_value": p, "df": df}
        return out


# ---------------------------------------------------------------------------
# normalization and splits
# ---------------------------------------------------------------------------


def normalize_and_dedup(phrases: Iterable[str]) -> list[str]:
    """Stem keys of the phrases, later duplicates removed."""
    keys = []
    seen = set()
    for phrase in phrases:
        key = textproc.phrase_stem_key(phrase)
        if key and key not in seen:
            seen.add(key)
            keys.append(key)
    return keys


def split_present_absent(
    gold_keys: Sequence[str], text: str
) -> tuple[list[str], list[str]]:
    """Partition stem keys by contiguous stem presence in the text."""
    stems = textproc.stem_sequence(text)
    present = [k for k in gold_keys if textproc.contains_stem_key(stems, k)]
    absent = [k for k in gold_keys if not textproc.contains_stem_key(stems, k)]
    return present, absent


# ---------------------------------------------------------------------------
# F1
# ---------------------------------------------------------------------------


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def f1_at_m(gold: Sequence[str], pred: Sequence[str]) -> float:
    """F1 at the model's own prediction count."""
    if not gold:
        raise EvalError("empty gold set")
    matches = len(set(gold) & set(pred))
    precision = matches / len(pred) if pred else 0.0
    recall = matches / len(gold)
    return _f1(precision, recall)


def f1_at_k(gold: Sequence[str], pred: Sequence[str], k: int) -> float:
    """F1 at cutoff k; short prediction lists are padded (denominator k)."""
    if not gold:
        raise EvalError("empty gold set")
    if k < 1:
        raise EvalError("k must be >= 1")
    top = list(pred)[:k]
    matches = len(set(gold) & set(top))
    precision = matches / k
    recall = matches / len(gold)
    return _f1(precision, recall)


# ---------------------------------------------------------------------------
# corpus evaluation
# ---------------------------------------------------------------------------


def evaluate(docs: Sequence[LabeledDoc], ks: Sequence[int] = DEFAULT_KS) -> EvalReport:
    """Per-document and macro-averaged scores for all/present/absent splits.

    Split metrics filter both gold and predictions by presence in the
    source text; a document whose split gold is empty is excluded from
    that split's macro-average.
    """
    if not docs:
        raise EvalError("need at least one document")
    report = EvalReport(ks=tuple(ks))
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for doc in docs:
        gold = normalize_and_dedup(doc.gold)
        if not gold:
            raise EvalError(f"document {doc.doc_id!r} has no gold keyphrases")
        pred = normalize_and_dedup(doc.pred)
        stems = textproc.stem_sequence(doc.text)

        def in_text(key: str) -> bool:
            return textproc.contains_stem_key(stems, key)

        subsets = {
            "all": (gold, pred),
            "present": ([g for g in gold if in_text(g)], [p for p in pred if in_text(p)]),
            "absent": ([g for g in gold if not in_text(g)], [p for p in pred if not in_text(p)]),
        }
        scores: dict[str, float | None] = {}
        for split, (g, p) in subsets.items():
            if not g:
                scores[f"{split}/f1@M"] = None
                for k in ks:
                    scores[f"{split}/f1@{k}"] = None
                continue
            scores[f"{split}/f1@M"] = f1_at_m(g, p)
            for k in ks:
                scores[f"{split}/f1@{k}"] = f1_at_k(g, p, k)
        report.per_doc.append((doc.doc_id, scores))
        for key, value in scores.items():
            if value is not None:
                sums[key] = sums.get(key, 0.0) + value
                counts[key] = counts.get(key, 0) + 1
    report.aggregate = {key: sums[key] / counts[key] for key in sums}
    return report


def format_table(report: EvalReport) -> str:
    """Aligned plain-text table: F1@M / F1@k columns x all/pres/abs."""
    names = ["f1@M"] + [f"f1@{k}" for k in report.ks]
    header_top = ["metric"] + [name for name in names for _ in SPLITS]
    header_bot = [""] + [split[:4] for _ in names for split in SPLITS]
    row = ["score"]
    for name in names:
        for split in SPLITS:
            value = report.aggregate.get(f"{split}/{name}")
            row.append("-" if value is None else f"{100 * value:.1f}")
    widths = [max(len(a), len(b), len(c)) for a, b, c in zip(header_top, header_bot, row)]
    lines = []
    for cells in (header_top, header_bot, row):
        lines.append("  ".join(cell.rjust(w) for cell, w in zip(cells, widths)))
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# paired significance test
# ---------------------------------------------------------------------------


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            return h
    raise EvalError("incomplete beta continued fraction did not converge")


def _betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log(1.0 - x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf2(t: float, df: int) -> float:
    """Two-tailed tail probability P(|T| >= |t|) for Student's t."""
    if df < 1:
        raise EvalError("df must be >= 1")
    x = df / (df + t * t)
    return _betainc_reg(df / 2.0, 0.5, x)


def paired_t_test(scores_a: Sequence[float], scores_b: Sequence[float]) -> tuple[float, float, int]:
    """Two-tailed Student paired t-test on per-document differences.

    Returns (t, p, df). Zero-variance differences with a non-zero mean
    yield (signed inf, 0.0, df); all-zero differences are degenerate.
    """
    if len(scores_a) != len(scores_b):
        raise EvalError("score lists must have equal length")
    n = len(scores_a)
    if n < 2:
        raise EvalError("need at least 2 paired scores")
    diffs = [a - b for a, b in zip(scores_a, scores_b)]
    mean = sum(diffs) / n
    if all(d == 0.0 for d in diffs):
        raise EvalError("degenerate input: all paired differences are zero")
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    df = n - 1
    if var == 0.0:
        return (math.inf if mean > 0 else -math.inf, 0.0, df)
    t = mean / math.sqrt(var / n)
    return (t, student_t_sf2(t, df), df)


# ---------------------------------------------------------------------------
# statistics and overlap
# ---------------------------------------------------------------------------


@dataclass
class CorpusStats:
    docs: int
    doc_len_tokens: float
    kp_per_doc: float
    kp_len_tokens: float
    pct_absent: float

    def to_json(self) -> dict:
        return {
            "docs": self.docs,
            "doc_len_tokens": round(self.doc_len_tokens, 6),
            "kp_per_doc": round(self.kp_per_doc, 6),
            "kp_len_tokens": round(self.kp_len_tokens, 6),
            "pct_absent": round(self.pct_absent, 6),
        }


def _stat_row(item) -> tuple[str, str, list[str]]:
    """(title, abstract, keyphrases) from a LabeledDoc, SilverSample or dict."""
    if isinstance(item, LabeledDoc):
        return item.title, item.abstract, list(item.gold)
    if isinstance(item, dict):
        return item["title"], item["abstract"], list(item["keyphrases"])
    # silver sample
    return item.title, item.abstract, [kp.text for kp in item.keyphrases]


def corpus_stats(items: Iterable) -> CorpusStats:
    """Mean document length, keyphrases/doc, keyphrase length and percent
    absent over labeled docs or silver samples."""
    rows = [_stat_row(item) for item in items]
    if not rows:
        return CorpusStats(0, 0.0, 0.0, 0.0, 0.0)
    doc_tokens = 0
    kp_count = 0
    kp_tokens = 0
    absent = 0
    for title, abstract, phrases in rows:
        text = title + ". " + abstract
        doc_tokens += len(textproc.token_surfaces(text))
        stems = textproc.stem_sequence(text)
        for phrase in phrases:
            key = textproc.phrase_stem_key(phrase)
            if not key:
                continue
            kp_count += 1
            kp_tokens += len(key.split(" "))
            if not textproc.contains_stem_key(stems, key):
                absent += 1
    return CorpusStats(
        docs=len(rows),
        doc_len_tokens=doc_tokens / len(rows),
        kp_per_doc=kp_count / len(rows),
        kp_len_tokens=kp_tokens / kp_count if kp_count else 0.0,
        pct_absent=100.0 * absent / kp_count if kp_count else 0.0,
    )


def silver_keyphrase_union(samples: Iterable) -> set[str]:
    """Stem keys of every keyphrase across the silver samples."""
    union = set()
    for sample in samples:
        if isinstance(sample, dict):
            union.update(k for k in normalize_and_dedup(sample["keyphrases"]))
        else:
            union.update(kp.stem_key for kp in sample.keyphrases)
    return union


def silver_overlap(pred_lists: Sequence[Sequence[str]], samples: Iterable) -> tuple[list[int], int]:
    """Per-document and total counts of predicted phrases found in the
    silver keyphrase union."""
    union = silver_keyphrase_union(samples)
    counts = [len(set(normalize_and_dedup(preds)) & union) for preds in pred_lists]
    return counts, sum(counts)


def overlap_delta(count_a: int, count_b: int) -> int:
    """Signed difference; negative means system A generates fewer silver
    keyphrases than system B."""
    return count_a - count_b


# ---------------------------------------------------------------------------
# file I/O
# ---------------------------------------------------------------------------


def read_gold_docs(path: str | Path) -> list[LabeledDoc]:
    """JSONL of {"id", "title", "abstract", "keyphrases"}."""
    docs = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        data = json.loads(line)
        docs.append(
            LabeledDoc(
                doc_id=data["id"],
                title=data["title"],
                abstract=data["abstract"],
                gold=tuple(data["keyphrases"]),
            )
        )
    return docs


def read_pred_map(path: str | Path) -> dict[str, tuple[str, ...]]:
    """JSONL of {"id", "keyphrases"} keyed by id."""
    preds: dict[str, tuple[str, ...]] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        data = json.loads(line)
        preds[data["id"]] = tuple(data["keyphrases"])
    return preds


def join_predictions(gold_docs: Sequence[LabeledDoc], preds: dict[str, tuple[str, ...]]) -> list[LabeledDoc]:
    """Attach predictions to gold docs; docs without predictions score
    against an empty list."""
    return [replace(doc, pred=preds.get(doc.doc_id, ())) for doc in gold_docs]
