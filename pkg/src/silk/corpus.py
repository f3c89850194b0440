"""Corpus ingestion, citation-context extraction and external lookup.

Documents arrive as JSONL records (one per line):

    {"id": str, "title": str, "abstract": str,
     "sentences": [{"section": str, "text": str,
                    "anchors": [{"start": int, "end": int, "target": str}],
                    "tokens": [{"t": str, "pos": str}]  # optional
                   }]}

Offsets are character offsets into the sentence text. The store is
immutable after ingest; external-lookup resolution produces a new store.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import IO, Callable, Iterable, Iterator, Protocol

import requests

SECTION_LABELS = ("intro", "related_work", "materials_methods", "geological_settings", "other")


class CorpusError(Exception):
    pass


class DuplicateDocIdError(CorpusError):
    def __init__(self, doc_id: str):
        super().__init__(f"duplicate doc_id: {doc_id!r}")
        self.doc_id = doc_id


class UnknownDocumentError(CorpusError, KeyError):
    def __init__(self, doc_id: str):
        super().__init__(f"unknown doc_id: {doc_id!r}")
        self.doc_id = doc_id


class LookupTransportError(CorpusError):
    """Transient lookup failure; retried by resolve_external."""


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CitationAnchor:
    start: int
    end: int
    target: str


@dataclass(frozen=True)
class Sentence:
    section: str
    text: str
    anchors: tuple[CitationAnchor, ...] = ()
    tokens: tuple[tuple[str, str], ...] | None = None  # optional gold (surface, pos)


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    abstract: str
    sentences: tuple[Sentence, ...] = ()
    source: str = "native"  # native | external_lookup


@dataclass(frozen=True)
class CitationContext:
    citing_doc_id: str
    sentence_text: str
    targets: tuple[str, ...]
    anchor_group_count: int
    sentence_index: int
    tokens: tuple[tuple[str, str], ...] | None = None


@dataclass
class IngestReport:
    read: int = 0
    rejected: int = 0
    errors: list[tuple[int, str]] = field(default_factory=list)  # (line_no, message)

    def to_json(self) -> dict:
        return {
            "read": self.read,
            "rejected": self.rejected,
            "errors": [{"line": n, "error": m} for n, m in self.errors],
        }


@dataclass
class DropReport:
    extracted: int = 0
    kept: int = 0
    scattered: int = 0
    out_of_collection: int = 0
    unresolvable: int = 0

    def to_json(self) -> dict:
        return {
            "extracted": self.extracted,
            "kept": self.kept,
            "dropped": {
                "scattered": self.scattered,
                "out_of_collection": self.out_of_collection,
                "unresolvable": self.unresolvable,
            },
        }


class CorpusStore:
    """Immutable document index, optionally carrying the kept contexts."""

    def __init__(
        self,
        documents: Iterable[Document],
        contexts: Iterable[CitationContext] | None = None,
    ):
        docs: dict[str, Document] = {}
        for doc in documents:
            if doc.doc_id in docs:
                raise DuplicateDocIdError(doc.doc_id)
            docs[doc.doc_id] = doc
        self._docs = docs
        self._contexts = tuple(contexts) if contexts is not None else None

    def __len__(self) -> int:
        return len(self._docs)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._docs

    def __getitem__(self, doc_id: str) -> Document:
        try:
            return self._docs[doc_id]
        except KeyError:
            raise UnknownDocumentError(doc_id) from None

    def doc_ids(self) -> list[str]:
        return sorted(self._docs)

    def documents(self) -> Iterator[Document]:
        for doc_id in self.doc_ids():
            yield self._docs[doc_id]

    @property
    def contexts(self) -> tuple[CitationContext, ...]:
        if self._contexts is None:
            raise CorpusError("store carries no contexts; run the context stage first")
        return self._contexts

    def with_documents(self, extra: Iterable[Document]) -> "CorpusStore":
        return CorpusStore(list(self._docs.values()) + list(extra), self._contexts)

    def with_contexts(self, contexts: Iterable[CitationContext]) -> "CorpusStore":
        return CorpusStore(self._docs.values(), contexts)


# ---------------------------------------------------------------------------
# ingest / export
# ---------------------------------------------------------------------------


def _parse_record(data: dict) -> Document:
    doc_id = data.get("id")
    if not isinstance(doc_id, str) or not doc_id:
        raise ValueError("missing or empty id")
    title = data.get("title")
    if not isinstance(title, str) or not title.strip():
        raise ValueError("missing or empty title")
    abstract = data.get("abstract")
    if not isinstance(abstract, str):
        raise ValueError("missing abstract")
    if not abstract.strip() and data.get("source", "native") == "native":
        raise ValueError("empty abstract on a native record")
    sentences = []
    for i, s in enumerate(data.get("sentences", [])):
        section = s.get("section")
        if section not in SECTION_LABELS:
            raise ValueError(f"sentence {i}: unknown section {section!r}")
        text = s.get("text")
        if not isinstance(text, str):
            raise ValueError(f"sentence {i}: missing text")
        anchors = []
        for a in s.get("anchors", []):
            start, end, target = a.get("start"), a.get("end"), a.get("target")
            if not (isinstance(start, int) and isinstance(end, int) and 0 <= start < end <= len(text)):
                raise ValueError(f"sentence {i}: anchor span [{start}, {end}) outside text")
            if not isinstance(target, str) or not target:
                raise ValueError(f"sentence {i}: anchor missing target")
            anchors.append(CitationAnchor(start=start, end=end, target=target))
        tokens = None
        if "tokens" in s:
            tokens = []
            for t in s["tokens"]:
                surface, pos = t.get("t"), t.get("pos")
                if not surface or not isinstance(pos, str):
                    raise ValueError(f"sentence {i}: malformed token entry")
                tokens.append((surface, pos.upper()))
            tokens = tuple(tokens)
        sentences.append(Sentence(section=section, text=text, anchors=tuple(anchors), tokens=tokens))
    return Document(
        doc_id=doc_id,
        title=title,
        abstract=abstract,
        sentences=tuple(sentences),
        source=data.get("source", "native"),
    )


def ingest(lines: Iterable[str] | str | Path) -> tuple[CorpusStore, IngestReport]:
    """Build an immutable store from JSONL document records.

    Malformed lines and schema violations reject the record (recorded with
    the line number); a duplicate doc_id is fatal.
    """
    if isinstance(lines, (str, Path)):
        lines = Path(lines).read_text(encoding="utf-8").splitlines()
    report = IngestReport()
    docs: list[Document] = []
    seen: set[str] = set()
    for line_no, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        report.read += 1
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            report.rejected += 1
            report.errors.append((line_no, f"malformed JSON: {exc.msg}"))
            continue
        try:
            doc = _parse_record(data)
        except ValueError as exc:
            report.rejected += 1
            report.errors.append((line_no, str(exc)))
            continue
        if doc.doc_id in seen:
            raise DuplicateDocIdError(doc.doc_id)
        seen.add(doc.doc_id)
        docs.append(doc)
    return CorpusStore(docs), report


def document_to_record(doc: Document) -> dict:
    record: dict = {
        "id": doc.doc_id,
        "title": doc.title,
        "abstract": doc.abstract,
        "sentences": [],
    }
    for s in doc.sentences:
        entry: dict = {
            "section": s.section,
            "text": s.text,
            "anchors": [{"start": a.start, "end": a.end, "target": a.target} for a in s.anchors],
        }
        if s.tokens is not None:
            entry["tokens"] = [{"t": t, "pos": p} for t, p in s.tokens]
        record["sentences"].append(entry)
    if doc.source != "native":
        record["source"] = doc.source
    return record


def export_store(store: CorpusStore, fp: IO[str] | str | Path) -> None:
    """Write normalized records, sorted by doc_id; re-ingesting the output
    reproduces the store byte-for-byte."""
    if isinstance(fp, (str, Path)):
        with open(fp, "w", encoding="utf-8") as handle:
            export_store(store, handle)
        return
    for doc in store.documents():
        fp.write(json.dumps(document_to_record(doc), sort_keys=True, ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# context extraction and filtering
# ---------------------------------------------------------------------------

_GROUP_SEPARATOR_RE = re.compile(r"^[\s,;\[\]\(\)\{\}]*$")


def _anchor_group_count(text: str, anchors: tuple[CitationAnchor, ...]) -> int:
    """Anchors separated only by whitespace/commas/semicolons/brackets form
    one group; anything else starts a new group."""
    ordered = sorted(anchors, key=lambda a: (a.start, a.end))
    groups = 1
    for prev, cur in zip(ordered, ordered[1:]):
        between = text[prev.end : cur.start]
        if not _GROUP_SEPARATOR_RE.match(between):
            groups += 1
    return groups


def extract_contexts(store: CorpusStore, section_filter: Iterable[str]) -> list[CitationContext]:
    """One context per anchored sentence within the requested sections."""
    wanted = set(section_filter)
    contexts = []
    for doc in store.documents():
        for index, sentence in enumerate(doc.sentences):
            if sentence.section not in wanted or not sentence.anchors:
                continue
            targets: list[str] = []
            for anchor in sorted(sentence.anchors, key=lambda a: (a.start, a.end)):
                if anchor.target not in targets:
                    targets.append(anchor.target)
            contexts.append(
                CitationContext(
                    citing_doc_id=doc.doc_id,
                    sentence_text=sentence.text,
                    targets=tuple(targets),
                    anchor_group_count=_anchor_group_count(sentence.text, sentence.anchors),
                    sentence_index=index,
                    tokens=sentence.tokens,
                )
            )
    return contexts


def filter_contexts(
    contexts: Iterable[CitationContext],
    store: CorpusStore,
    allow_external: bool = False,
) -> tuple[list[CitationContext], DropReport, list[str]]:
    """Drop scattered and out-of-collection contexts.

    Returns (kept contexts, drop report, queued external target ids). With
    allow_external, contexts whose targets are unresolved are kept and the
    missing ids queued for lookup; otherwise unresolved targets are pruned
    and contexts left targetless are dropped.
    """
    report = DropReport()
    kept: list[CitationContext] = []
    queued: list[str] = []
    queued_seen: set[str] = set()
    for ctx in contexts:
        report.extracted += 1
        if ctx.anchor_group_count > 1:
            report.scattered += 1
            continue
        in_store = tuple(t for t in ctx.targets if t in store)
        missing = tuple(t for t in ctx.targets if t not in store)
        if allow_external:
            for t in missing:
                if t not in queued_seen:
                    queued_seen.add(t)
                    queued.append(t)
            kept.append(ctx)
        elif in_store:
            kept.append(ctx if not missing else replace(ctx, targets=in_store))
        else:
            report.out_of_collection += 1
            continue
        report.kept += 1
    return kept, report, queued


def finalize_contexts(
    contexts: Iterable[CitationContext],
    store: CorpusStore,
    report: DropReport,
) -> list[CitationContext]:
    """Prune targets that never resolved; drop contexts left targetless.

    Mutates the report (unresolvable count, kept count) so the reason
    histogram still sums to extracted - kept.
    """
    final = []
    for ctx in contexts:
        resolved = tuple(t for t in ctx.targets if t in store)
        if not resolved:
            report.unresolvable += 1
            report.kept -= 1
            continue
        final.append(ctx if resolved == ctx.targets else replace(ctx, targets=resolved))
    return final


# ---------------------------------------------------------------------------
# external lookup
# ---------------------------------------------------------------------------


class LookupClient(Protocol):
    def fetch(self, doc_id: str) -> tuple[str, str] | None:
        """(title, abstract) for the id, or None if the id does not exist."""
        ...


class FixtureLookupClient:
    """Deterministic client backed by an in-memory mapping."""

    def __init__(self, records: dict[str, tuple[str, str]]):
        self.records = dict(records)
        self.calls = 0

    def fetch(self, doc_id: str) -> tuple[str, str] | None:
        self.calls += 1
        return self.records.get(doc_id)


class HttpLookupClient:
    """GET {base_url}/paper/{id} -> 200 {"id", "title", "abstract"} or 404."""

    def __init__(self, base_url: str, timeout: float = 10.0, session=None):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.session = session or requests.Session()

    def fetch(self, doc_id: str) -> tuple[str, str] | None:
        try:
            resp = self.session.get(f"{self.base_url}/paper/{doc_id}", timeout=self.timeout)
        except requests.RequestException as exc:
            raise LookupTransportError(f"lookup failed for {doc_id!r}: {exc}") from exc
        if resp.status_code == 404:
            return None
        if resp.status_code != 200:
            raise LookupTransportError(f"lookup for {doc_id!r} returned HTTP {resp.status_code}")
        try:
            data = resp.json()
            return str(data["title"]), str(data["abstract"])
        except (ValueError, KeyError) as exc:
            raise LookupTransportError(f"malformed lookup payload for {doc_id!r}: {exc}") from exc


def resolve_external(
    queued: Iterable[str],
    client: LookupClient,
    max_retries: int = 3,
    backoff: float = 0.1,
    sleep: Callable[[float], None] = time.sleep,
) -> tuple[list[Document], list[str]]:
    """Fetch queued ids; (resolved external documents, unresolvable ids).

    Transport failures are retried with exponential backoff up to
    max_retries attempts; a definitive miss (None) is not retried.
    """
    documents: list[Document] = []
    unresolvable: list[str] = []
    for doc_id in sorted(set(queued)):
        result = None
        for attempt in range(max_retries):
            try:
                result = client.fetch(doc_id)
                break
            except LookupTransportError:
                if attempt == max_retries - 1:
                    result = None
                else:
                    sleep(backoff * (2**attempt))
        if result is None:
            unresolvable.append(doc_id)
        else:
            title, abstract = result
            documents.append(
                Document(doc_id=doc_id, title=title, abstract=abstract, source="external_lookup")
            )
    return documents, unresolvable


# ---------------------------------------------------------------------------
# context serialization (pipeline stage handoff)
# ---------------------------------------------------------------------------


def context_to_record(ctx: CitationContext) -> dict:
    record = {
        "anchor_group_count": ctx.anchor_group_count,
        "citing_doc_id": ctx.citing_doc_id,
        "sentence_index": ctx.sentence_index,
        "sentence_text": ctx.sentence_text,
        "targets": list(ctx.targets),
    }
    if ctx.tokens is not None:
        record["tokens"] = [{"t": t, "pos": p} for t, p in ctx.tokens]
    return record


def context_from_record(record: dict) -> CitationContext:
    tokens = None
    if "tokens" in record:
        tokens = tuple((t["t"], t["pos"]) for t in record["tokens"])
    return CitationContext(
        citing_doc_id=record["citing_doc_id"],
        sentence_text=record["sentence_text"],
        targets=tuple(record["targets"]),
        anchor_group_count=record["anchor_group_count"],
        sentence_index=record["sentence_index"],
        tokens=tokens,
    )


def write_contexts(contexts: Iterable[CitationContext], fp: IO[str] | str | Path) -> None:
    if isinstance(fp, (str, Path)):
        with open(fp, "w", encoding="utf-8") as handle:
            write_contexts(contexts, handle)
        return
    for ctx in contexts:
        fp.write(json.dumps(context_to_record(ctx), sort_keys=True, ensure_ascii=False) + "\n")


def read_contexts(fp: IO[str] | str | Path) -> list[CitationContext]:
    if isinstance(fp, (str, Path)):
        with open(fp, "r", encoding="utf-8") as handle:
            return read_contexts(handle)
    return [context_from_record(json.loads(line)) for line in fp if line.strip()]


# ---------------------------------------------------------------------------
# queries
# ---------------------------------------------------------------------------


def contexts_of(store: CorpusStore, doc_id: str) -> list[CitationContext]:
    """Kept contexts citing doc_id, ordered by (citing_doc_id, sentence)."""
    if doc_id not in store:
        raise UnknownDocumentError(doc_id)
    matching = [ctx for ctx in store.contexts if doc_id in ctx.targets]
    return sorted(matching, key=lambda c: (c.citing_doc_id, c.sentence_index))


def collect_contexts(
    store: CorpusStore,
    section_filter: Iterable[str],
    allow_external: bool = False,
    client: LookupClient | None = None,
) -> tuple[CorpusStore, DropReport]:
    """Full context stage: extract, filter, resolve externals, finalize.

    Returns a new store carrying the kept contexts (and any resolved
    external documents) plus the drop report.
    """
    extracted = extract_contexts(store, section_filter)
    kept, report, queued = filter_contexts(extracted, store, allow_external=allow_external)
    if queued:
        if client is None:
            raise CorpusError("external targets queued but no lookup client configured")
        resolved, _ = resolve_external(queued, client)
        store = store.with_documents(resolved)
    final = finalize_contexts(kept, store, report)
    return store.with_contexts(final), report
