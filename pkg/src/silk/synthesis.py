"""Silver-keyphrase mining: candidates, scoring, constrained selection,
confidence ranking and sample emission.

A candidate's score combines three signals: a salience boost from how many
of {title, abstract, citation contexts} contain it, the cosine relevance
of its embedding to the title embedding, and a reliability term that grows
with the number of citation contexts containing it:

    score = alpha * max(0, cos(emb(phrase), emb(title))) * (1 + log2(1 + freq_cc))

The reliability form is neutral (1) for phrases never seen in a context
and strictly increasing in context frequency.
"""

from __future__ import annotations

import json
import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from . import textproc
from .corpus import CorpusStore, contexts_of
from .embedding import EmbeddingProvider, clamped_relevance, cosine_sim, embed_unique
from .textproc import Phrase, Stoplist, Tagger, analyze, chunk_noun_phrases

DEFAULT_ALPHA_TABLE = {1: 1.0, 2: 1.5, 3: 2.0}


class SynthesisError(Exception):
    pass


@dataclass(frozen=True)
class SelectionConfig:
    lambda_x: float = 0.85
    lambda_r: float = 0.75
    min_kp: int = 3
    max_kp: int = 5
    max_content_kp: int = 3

    def __post_init__(self):
        if not (0.0 < self.lambda_x <= 1.0 and 0.0 < self.lambda_r <= 1.0):
            raise ValueError("lambda_x and lambda_r must lie in (0, 1]")
        if not (0 < self.min_kp <= self.max_kp):
            raise ValueError("need 0 < min_kp <= max_kp")
        if self.max_content_kp > self.max_kp:
            raise ValueError("max_content_kp cannot exceed max_kp")


@dataclass(frozen=True)
class Candidate:
    phrase: Phrase
    in_title: bool
    in_abstract: bool
    freq_cc: int
    alpha: float
    relevance: float = 0.0
    reliability: float = 0.0
    score: float = 0.0
    vector: np.ndarray | None = field(default=None, compare=False, repr=False)

    @property
    def origin(self) -> str:
        return "content" if (self.in_title or self.in_abstract) else "context"


@dataclass(frozen=True)
class SampleKeyphrase:
    text: str  # normalized (lemma) form, the emitted label
    surface: str
    stem_key: str
    score: float
    origin: str
    present: bool


@dataclass(frozen=True)
class SilverSample:
    doc_id: str
    title: str
    abstract: str
    keyphrases: tuple[SampleKeyphrase, ...]
    confidence: float

    @property
    def present_count(self) -> int:
        return sum(1 for kp in self.keyphrases if kp.present)


@dataclass
class RunReport:
    cited_docs: int = 0
    samples: int = 0
    dropped_min_kp: int = 0
    mean_kp_per_doc: float = 0.0
    pct_absent: float = 0.0

    def to_json(self) -> dict:
        return {
            "cited_docs": self.cited_docs,
            "samples": self.samples,
            "dropped_min_kp": self.dropped_min_kp,
            "mean_kp_per_doc": round(self.mean_kp_per_doc, 6),
            "pct_absent": round(self.pct_absent, 6),
        }


# ---------------------------------------------------------------------------
# candidate building
# ---------------------------------------------------------------------------


def reliability_of(freq_cc: int) -> float:
    return 1.0 + math.log2(1.0 + freq_cc)


def alpha_of(in_title: bool, in_abstract: bool, freq_cc: int,
             alpha_table: dict[int, float] | None = None) -> float:
    table = alpha_table or DEFAULT_ALPHA_TABLE
    count = int(in_title) + int(in_abstract) + int(freq_cc > 0)
    if count == 0:
        raise ValueError("candidate occurs in none of title/abstract/contexts")
    return table[count]


def build_candidates(
    store: CorpusStore,
    doc_id: str,
    stoplist: Stoplist,
    tagger: Tagger,
    max_phrase_len: int = textproc.DEFAULT_MAX_PHRASE_LEN,
    alpha_table: dict[int, float] | None = None,
) -> list[Candidate]:
    """Phrases from title, abstract and every citation context of the
    document, deduplicated by stem key (first-seen surface retained).

    Provenance flags and freq_cc use the stem-sequence presence test, so a
    phrase counts for a context whenever its stems occur there regardless
    of where it was first chunked.
    """
    doc = store[doc_id]
    contexts = contexts_of(store, doc_id)

    ordered: list[Phrase] = []
    by_key: dict[str, Phrase] = {}

    def add_phrases(text: str, supplied=None) -> None:
        for phrase in chunk_noun_phrases(
            analyze(text, tagger, supplied), stoplist, max_phrase_len
        ):
            if phrase.stem_key not in by_key:
                by_key[phrase.stem_key] = phrase
                ordered.append(phrase)

    add_phrases(doc.title)
    add_phrases(doc.abstract)
    for ctx in contexts:
        add_phrases(ctx.sentence_text, ctx.tokens)

    title_stems = textproc.stem_sequence(doc.title)
    abstract_stems = textproc.stem_sequence(doc.abstract)
    # presence inside a context uses the tokenization the chunker saw, so a
    # phrase chunked from a gold-tokenized sentence always counts for it
    context_stems = [
        tuple(textproc.word_stem(t) for t, _ in ctx.tokens)
        if ctx.tokens is not None
        else textproc.stem_sequence(ctx.sentence_text)
        for ctx in contexts
    ]

    candidates = []
    for phrase in ordered:
        in_title = textproc.contains_stem_key(title_stems, phrase.stem_key)
        in_abstract = textproc.contains_stem_key(abstract_stems, phrase.stem_key)
        freq_cc = sum(
            1 for stems in context_stems if textproc.contains_stem_key(stems, phrase.stem_key)
        )
        candidates.append(
            Candidate(
                phrase=phrase,
                in_title=in_title,
                in_abstract=in_abstract,
                freq_cc=freq_cc,
                alpha=alpha_of(in_title, in_abstract, freq_cc, alpha_table),
            )
        )
    return candidates


# ---------------------------------------------------------------------------
# scoring
# ---------------------------------------------------------------------------


def score_candidate(
    candidate: Candidate, title_vec: np.ndarray, provider: EmbeddingProvider
) -> Candidate:
    """Fill relevance/reliability/score for one candidate."""
    try:
        vector = provider.embed_batch([candidate.phrase.surface])[0]
    except Exception as exc:
        raise SynthesisError(f"embedding failed for phrase {candidate.phrase.surface!r}: {exc}") from exc
    relevance = clamped_relevance(vector, title_vec)
    reliability = reliability_of(candidate.freq_cc)
    return replace(
        candidate,
        relevance=relevance,
        reliability=reliability,
        score=candidate.alpha * relevance * reliability,
        vector=vector,
    )


def score_candidates(
    candidates: Sequence[Candidate], title_vec: np.ndarray, provider: EmbeddingProvider
) -> list[Candidate]:
    """Batch variant: one provider call for all distinct surfaces."""
    vectors = embed_unique(provider, (c.phrase.surface for c in candidates))
    scored = []
    for c in candidates:
        vector = vectors[c.phrase.surface]
        relevance = clamped_relevance(vector, title_vec)
        reliability = reliability_of(c.freq_cc)
        scored.append(
            replace(
                c,
                relevance=relevance,
                reliability=reliability,
                score=c.alpha * relevance * reliability,
                vector=vector,
            )
        )
    return scored


# ---------------------------------------------------------------------------
# selection
# ---------------------------------------------------------------------------


def selection_order(candidates: Iterable[Candidate]) -> list[Candidate]:
    """Score-descending, ties broken by freq_cc desc then normalized asc."""
    return sorted(
        candidates, key=lambda c: (-c.score, -c.freq_cc, c.phrase.normalized)
    )


def select_keyphrases(
    candidates: Sequence[Candidate],
    config: SelectionConfig,
    provider: EmbeddingProvider | None = None,
) -> list[Candidate] | None:
    """Greedy constrained selection; None if fewer than min_kp survive.

    Context-origin candidates below lambda_r relevance are discarded, then
    candidates are taken in score order, skipping any that would exceed
    max_kp, exceed max_content_kp for content phrases, or sit within
    lambda_x cosine of an already-selected phrase.
    """
    eligible = []
    for c in candidates:
        if c.origin == "context" and c.relevance < config.lambda_r:
            continue
        if c.vector is None:
            if provider is None:
                raise SynthesisError(f"candidate {c.phrase.surface!r} has no embedding vector")
            c = replace(c, vector=provider.embed_batch([c.phrase.surface])[0])
        eligible.append(c)

    selected: list[Candidate] = []
    content_count = 0
    for c in selection_order(eligible):
        if len(selected) == config.max_kp:
            break
        if c.origin == "content" and content_count == config.max_content_kp:
            continue
        if any(cosine_sim(c.vector, s.vector) >= config.lambda_x for s in selected):
            continue
        selected.append(c)
        if c.origin == "content":
            content_count += 1
    if len(selected) < config.min_kp:
        return None
    return selected


def make_sample(doc, selected: Sequence[Candidate]) -> SilverSample:
    """Assemble the sample: present block first, score-descending within
    each block; confidence is the mean keyphrase score."""
    source_text = doc.title + ". " + doc.abstract
    keyphrases = []
    for c in selected:
        keyphrases.append(
            SampleKeyphrase(
                text=c.phrase.normalized,
                surface=c.phrase.surface,
                stem_key=c.phrase.stem_key,
                score=c.score,
                origin=c.origin,
                present=textproc.is_present(c.phrase, source_text),
            )
        )
    keyphrases.sort(key=lambda kp: (not kp.present, -kp.score, kp.text))
    confidence = sum(kp.score for kp in keyphrases) / len(keyphrases)
    return SilverSample(
        doc_id=doc.doc_id,
        title=doc.title,
        abstract=doc.abstract,
        keyphrases=tuple(keyphrases),
        confidence=confidence,
    )


# ---------------------------------------------------------------------------
# per-document and corpus mining
# ---------------------------------------------------------------------------


def mine_document(
    store: CorpusStore,
    doc_id: str,
    stoplist: Stoplist,
    tagger: Tagger,
    provider: EmbeddingProvider,
    config: SelectionConfig,
    max_phrase_len: int = textproc.DEFAULT_MAX_PHRASE_LEN,
    alpha_table: dict[int, float] | None = None,
) -> SilverSample | None:
    """Candidates -> scores -> selection for one cited document."""
    candidates = build_candidates(
        store, doc_id, stoplist, tagger, max_phrase_len=max_phrase_len, alpha_table=alpha_table
    )
    if not candidates:
        return None
    doc = store[doc_id]
    title_vec = provider.embed_batch([doc.title])[0]
    scored = score_candidates(candidates, title_vec, provider)
    selected = select_keyphrases(scored, config)
    if selected is None:
        return None
    return make_sample(doc, selected)


def mine_corpus(
    store: CorpusStore,
    stoplist: Stoplist,
    tagger: Tagger,
    provider: EmbeddingProvider,
    config: SelectionConfig,
    max_phrase_len: int = textproc.DEFAULT_MAX_PHRASE_LEN,
    alpha_table: dict[int, float] | None = None,
    workers: int = 1,
) -> tuple[list[SilverSample], RunReport]:
    """Mine every cited document (>= 1 kept context), confidence-ranked.

    Documents failing the min_kp constraint are dropped and counted. The
    result order is independent of worker count and input order.
    """
    cited_ids = sorted({t for ctx in store.contexts for t in ctx.targets})
    report = RunReport(cited_docs=len(cited_ids))

    def mine_one(doc_id: str) -> SilverSample | None:
        return mine_document(
            store, doc_id, stoplist, tagger, provider, config,
            max_phrase_len=max_phrase_len, alpha_table=alpha_table,
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(mine_one, cited_ids))
    else:
        results = [mine_one(doc_id) for doc_id in cited_ids]

    samples = [s for s in results if s is not None]
    report.dropped_min_kp = len(cited_ids) - len(samples)
    report.samples = len(samples)
    if samples:
        total_kp = sum(len(s.keyphrases) for s in samples)
        absent_kp = sum(1 for s in samples for kp in s.keyphrases if not kp.present)
        report.mean_kp_per_doc = total_kp / len(samples)
        report.pct_absent = 100.0 * absent_kp / total_kp
    return rank_documents(samples), report


# ---------------------------------------------------------------------------
# ranking and subset selection
# ---------------------------------------------------------------------------


def rank_documents(samples: Iterable[SilverSample]) -> list[SilverSample]:
    """Non-increasing confidence; ties by doc_id ascending."""
    return sorted(samples, key=lambda s: (-s.confidence, s.doc_id))


def take_top(samples: Sequence[SilverSample], n: int) -> list[SilverSample]:
    if n < 0:
        raise ValueError("n must be >= 0")
    return list(samples[:n])


def take_bottom(samples: Sequence[SilverSample], n: int) -> list[SilverSample]:
    if n < 0:
        raise ValueError("n must be >= 0")
    return list(samples[len(samples) - min(n, len(samples)) :])


def take_random(samples: Sequence[SilverSample], n: int, seed: int) -> list[SilverSample]:
    """Reproducible n-subset, preserving the incoming rank order."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n >= len(samples):
        return list(samples)
    picked = sorted(random.Random(seed).sample(range(len(samples)), n))
    return [samples[i] for i in picked]


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def emit_samples(samples: Iterable[SilverSample], fp: IO[str] | str | Path) -> None:
    """Final training JSONL: sorted keys, confidence fixed to 6 decimals,
    keyphrases with the present block first."""
    if isinstance(fp, (str, Path)):
        with open(fp, "w", encoding="utf-8") as handle:
            emit_samples(samples, handle)
        return
    for sample in samples:
        fp.write(emit_line(sample) + "\n")


def emit_line(sample: SilverSample) -> str:
    dumps = lambda obj: json.dumps(obj, ensure_ascii=False)  # noqa: E731
    keyphrases = dumps([kp.text for kp in sample.keyphrases])
    return (
        "{"
        f'"abstract": {dumps(sample.abstract)}, '
        f'"confidence": {sample.confidence:.6f}, '
        f'"id": {dumps(sample.doc_id)}, '
        f'"keyphrases": {keyphrases}, '
        f'"present_count": {sample.present_count}, '
        f'"title": {dumps(sample.title)}'
        "}"
    )


def parse_emitted(fp: IO[str] | str | Path) -> list[dict]:
    if isinstance(fp, (str, Path)):
        with open(fp, "r", encoding="utf-8") as handle:
            return parse_emitted(handle)
    return [json.loads(line) for line in fp if line.strip()]


def sample_to_record(sample: SilverSample) -> dict:
    """Full-fidelity record used between pipeline stages."""
    return {
        "id": sample.doc_id,
        "title": sample.title,
        "abstract": sample.abstract,
        "confidence": sample.confidence,
        "keyphrases": [
            {
                "text": kp.text,
                "surface": kp.surface,
                "stem_key": kp.stem_key,
                "score": kp.score,
                "origin": kp.origin,
                "present": kp.present,
            }
            for kp in sample.keyphrases
        ],
    }


def sample_from_record(record: dict) -> SilverSample:
    return SilverSample(
        doc_id=record["id"],
        title=record["title"],
        abstract=record["abstract"],
        confidence=record["confidence"],
        keyphrases=tuple(
            SampleKeyphrase(
                text=kp["text"],
                surface=kp["surface"],
                stem_key=kp["stem_key"],
                score=kp["score"],
                origin=kp["origin"],
                present=kp["present"],
            )
            for kp in record["keyphrases"]
        ),
    )


def write_sample_records(samples: Iterable[SilverSample], fp: IO[str] | str | Path) -> None:
    if isinstance(fp, (str, Path)):
        with open(fp, "w", encoding="utf-8") as handle:
            write_sample_records(samples, handle)
        return
    for sample in samples:
        fp.write(json.dumps(sample_to_record(sample), sort_keys=True, ensure_ascii=False) + "\n")


def read_sample_records(fp: IO[str] | str | Path) -> list[SilverSample]:
    if isinstance(fp, (str, Path)):
        with open(fp, "r", encoding="utf-8") as handle:
            return read_sample_records(handle)
    return [sample_from_record(json.loads(line)) for line in fp if line.strip()]
