"""Tokenization, POS tagging, noun-phrase chunking and stem-level matching.

The candidate substrate: noun phrases matching ADJ* NOUN+ over a small
three-way tagset, normalized to lowercase lemma form, with Porter stems as
the matching currency. All functions here are pure; taggers are pluggable
so corpora that ship gold POS tags can bypass the bundled rule tagger.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

from . import porter

POS_TAGS = ("ADJ", "NOUN", "OTHER")

# words and digit runs keep internal hyphens; any other non-space char is
# its own token
_TOKEN_RE = re.compile(r"\w+(?:-\w+)*|[^\w\s]")

DEFAULT_MAX_PHRASE_LEN = 5


class TextprocError(ValueError):
    """Raised for tagging/stoplist/presence precondition violations."""


def ascii_fold(text: str) -> str:
    """Strip diacritics and non-ASCII codepoints (NFKD fold)."""
    return unicodedata.normalize("NFKD", text).encode("ascii", "ignore").decode("ascii")


def word_stem(word: str) -> str:
    """Porter stem of a single lowercased, ASCII-folded word."""
    return porter.stem(ascii_fold(word.lower()))


@dataclass(frozen=True)
class Token:
    surface: str
    pos: str = ""
    lemma: str = ""
    stem: str = ""


@dataclass(frozen=True)
class Phrase:
    """A candidate phrase in its three forms.

    surface: original surfaces, space-joined; normalized: lowercase lemma
    form (the candidate identity shown to users); stem_key: space-joined
    Porter stems (the matching identity).
    """

    surface: str
    normalized: str
    stem_key: str

    def __len__(self) -> int:
        return len(self.stem_key.split(" "))


def tokenize(text: str) -> list[Token]:
    """Split text into surface-only tokens, keeping intra-word hyphens."""
    return [Token(surface=m.group(0)) for m in _TOKEN_RE.finditer(text)]


def token_surfaces(text: str) -> list[str]:
    return [m.group(0) for m in _TOKEN_RE.finditer(text)]


# ---------------------------------------------------------------------------
# lemmatization (noun plural stripping only; candidates are Adj*Noun+)
# ---------------------------------------------------------------------------

# compiled from a standard irregular-plural table
_IRREGULAR_PLURALS = {
    "analyses": "analysis",
    "appendices": "appendix",
    "axes": "axis",
    "bases": "basis",
    "corpora": "corpus",
    "crises": "crisis",
    "criteria": "criterion",
    "diagnoses": "diagnosis",
    "ellipses": "ellipsis",
    "emphases": "emphasis",
    "hypotheses": "hypothesis",
    "indices": "index",
    "matrices": "matrix",
    "oases": "oasis",
    "parentheses": "parenthesis",
    "phenomena": "phenomenon",
    "schemata": "schema",
    "syntheses": "synthesis",
    "taxa": "taxon",
    "theses": "thesis",
    "vertices": "vertex",
}

# singulars that end in s (or are invariant) and must keep their final s
_KEEP_FINAL_S = {"news", "series", "species", "bias", "corpus", "consensus"}
_KEEP_SUFFIXES = ("ss", "us", "is", "ics")


def lemmatize(token: Token) -> str:
    """Lowercased lemma; plural suffixes stripped for NOUN tokens only."""
    word = token.surface.lower()
    if token.pos != "NOUN":
        return word
    if word in _IRREGULAR_PLURALS:
        return _IRREGULAR_PLURALS[word]
    if word in _KEEP_FINAL_S or word.endswith(_KEEP_SUFFIXES):
        return word
    if word.endswith("ies") and len(word) >= 5:
        return word[:-3] + "y"
    if word.endswith("ses") and len(word) >= 4:
        return word[:-2]
    if word.endswith("s") and len(word) >= 3:
        return word[:-1]
    return word


# ---------------------------------------------------------------------------
# taggers
# ---------------------------------------------------------------------------


class Tagger(Protocol):
    """Maps token surfaces to the coarse tagset.

    ``supplied`` carries pre-tokenized (surface, pos) pairs from the
    ingestion record when the corpus provides gold tags; rule taggers
    ignore it.
    """

    def tag_surfaces(
        self, surfaces: Sequence[str], supplied: Sequence[tuple[str, str]] | None = None
    ) -> list[str]: ...


_NOUN_SUFFIXES = (
    "tion", "sion", "ment", "ness", "ance", "ence", "ship",
    "ism", "ist", "ity", "logy", "graphy", "metry",
)
_ADJ_SUFFIXES = ("ous", "ive", "able", "ible", "ful", "less", "ish")


class RuleLexiconTagger:
    """Lexicon lookup, then suffix rules, then OTHER."""

    def __init__(self, lexicon: dict[str, str] | None = None):
        self.lexicon = {}
        for word, tag in (lexicon or {}).items():
            tag = tag.upper()
            if tag not in POS_TAGS:
                raise TextprocError(f"unknown POS tag {tag!r} for lexicon word {word!r}")
            self.lexicon[word.lower()] = tag

    @classmethod
    def from_file(cls, path: str | Path) -> "RuleLexiconTagger":
        lexicon: dict[str, str] = {}
        for raw in Path(path).read_text(encoding="utf-8").splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise TextprocError(f"bad lexicon line: {raw!r}")
            lexicon[parts[0]] = parts[1]
        return cls(lexicon)

    def _lookup(self, word: str) -> str | None:
        if word in self.lexicon:
            return self.lexicon[word]
        # try naive singulars so plural forms inherit the lexicon tag
        if word.endswith("ies") and word[:-3] + "y" in self.lexicon:
            return self.lexicon[word[:-3] + "y"]
        if word.endswith("s") and word[:-1] in self.lexicon:
            return self.lexicon[word[:-1]]
        return None

    def tag_surfaces(
        self, surfaces: Sequence[str], supplied: Sequence[tuple[str, str]] | None = None
    ) -> list[str]:
        tags = []
        for surface in surfaces:
            word = surface.lower()
            tag = self._lookup(word)
            if tag is None and word.isalpha():
                base = word[:-1] if word.endswith("s") and len(word) > 3 else word
                if base.endswith(_NOUN_SUFFIXES):
                    tag = "NOUN"
                elif base.endswith(_ADJ_SUFFIXES):
                    tag = "ADJ"
            tags.append(tag or "OTHER")
        return tags


class PassthroughTagger:
    """Serves gold tags supplied by the ingestion record; errors otherwise."""

    def tag_surfaces(
        self, surfaces: Sequence[str], supplied: Sequence[tuple[str, str]] | None = None
    ) -> list[str]:
        if supplied is None:
            raise TextprocError("passthrough tagger requires pre-supplied POS tags")
        if [t for t, _ in supplied] != list(surfaces):
            raise TextprocError("pre-supplied tokens do not align with the tokenized text")
        tags = []
        for _, pos in supplied:
            pos = pos.upper()
            if pos not in POS_TAGS:
                raise TextprocError(f"unknown pre-supplied POS tag {pos!r}")
            tags.append(pos)
        return tags


def tag(
    tokens: Sequence[Token],
    tagger: Tagger,
    supplied: Sequence[tuple[str, str]] | None = None,
) -> list[Token]:
    """Return fully populated tokens (pos, lemma, stem) for surface tokens."""
    surfaces = [t.surface for t in tokens]
    tags = tagger.tag_surfaces(surfaces, supplied)
    out = []
    for token, pos in zip(tokens, tags):
        tagged = Token(surface=token.surface, pos=pos)
        out.append(
            Token(surface=token.surface, pos=pos, lemma=lemmatize(tagged),
                  stem=word_stem(token.surface))
        )
    return out


def analyze(
    text: str,
    tagger: Tagger,
    supplied: Sequence[tuple[str, str]] | None = None,
) -> list[Token]:
    """tokenize + tag in one step.

    When the record supplies its own (surface, pos) pairs they define the
    tokenization, so chunking sees exactly the tokens the tags belong to.
    """
    if supplied is not None:
        tokens = [Token(surface=t) for t, _ in supplied]
    else:
        tokens = tokenize(text)
    return tag(tokens, tagger, supplied)


# ---------------------------------------------------------------------------
# stoplist
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Stoplist:
    entries: frozenset[str]
    df_threshold: float = 0.0

    def __contains__(self, normalized: str) -> bool:
        return normalized in self.entries

    @classmethod
    def empty(cls) -> "Stoplist":
        return cls(entries=frozenset())


def load_stoplist_file(path: str | Path) -> frozenset[str]:
    """One normalized phrase per line; '#' starts a comment."""
    entries = set()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise TextprocError(f"cannot read stoplist file {path}: {exc}") from exc
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            entries.add(" ".join(line.lower().split()))
    return frozenset(entries)


def build_stoplist(
    store,
    df_threshold: float,
    extra_file: str | Path | None = None,
    tagger: Tagger | None = None,
) -> Stoplist:
    """Phrases whose document frequency over titles+abstracts reaches
    df_threshold * |store|, unioned with user-supplied entries."""
    tagger = tagger or RuleLexiconTagger()
    df: dict[str, int] = {}
    n_docs = 0
    for doc in store.documents():
        n_docs += 1
        seen = set()
        for text in (doc.title, doc.abstract):
            for phrase in chunk_noun_phrases(analyze(text, tagger)):
                seen.add(phrase.normalized)
        for normalized in seen:
            df[normalized] = df.get(normalized, 0) + 1
    entries = {p for p, count in df.items() if count >= df_threshold * n_docs and n_docs > 0}
    if extra_file is not None:
        entries |= load_stoplist_file(extra_file)
    return Stoplist(entries=frozenset(entries), df_threshold=df_threshold)


# ---------------------------------------------------------------------------
# chunking
# ---------------------------------------------------------------------------


def chunk_noun_phrases(
    tokens: Sequence[Token],
    stoplist: Stoplist | None = None,
    max_phrase_len: int = DEFAULT_MAX_PHRASE_LEN,
) -> list[Phrase]:
    """Noun-phrase candidates: maximal ADJ* NOUN+ matches plus every suffix
    sub-phrase ending at the same noun-run boundary.

    Phrases longer than max_phrase_len or matching the stoplist as a whole
    phrase are removed; duplicates (by normalized form) keep first position.
    """
    stoplist = stoplist or Stoplist.empty()
    phrases: list[Phrase] = []
    seen: set[str] = set()
    n = len(tokens)
    i = 0
    while i < n:
        if tokens[i].pos != "NOUN":
            i += 1
            continue
        # maximal noun run [i..end]
        end = i
        while end + 1 < n and tokens[end + 1].pos == "NOUN":
            end += 1
        # extend left over adjectives
        start = i
        while start - 1 >= 0 and tokens[start - 1].pos == "ADJ":
            start -= 1
        for k in range(start, end + 1):
            span = tokens[k : end + 1]
            if len(span) > max_phrase_len:
                continue
            phrase = Phrase(
                surface=" ".join(t.surface for t in span),
                normalized=" ".join(t.lemma for t in span),
                stem_key=" ".join(t.stem for t in span),
            )
            if phrase.normalized in stoplist or phrase.normalized in seen:
                continue
            seen.add(phrase.normalized)
            phrases.append(phrase)
        i = end + 1
    return phrases


# ---------------------------------------------------------------------------
# stem-level presence
# ---------------------------------------------------------------------------


def phrase_stem_key(text: str) -> str:
    """Stem key of a raw phrase string (tokenize, stem, join)."""
    return " ".join(word_stem(s) for s in token_surfaces(text))


def stem_sequence(text: str) -> tuple[str, ...]:
    """Per-token Porter stems of a text, punctuation tokens included."""
    return tuple(word_stem(s) for s in token_surfaces(text))


def contains_stem_key(stems: Sequence[str], stem_key: str) -> bool:
    """True iff stem_key occurs as a contiguous run inside stems."""
    needle = stem_key.split(" ")
    width = len(needle)
    if width == 0 or needle == [""]:
        raise TextprocError("empty phrase")
    return any(list(stems[i : i + width]) == needle for i in range(len(stems) - width + 1))


def is_present(phrase: Phrase | str, document_text: str) -> bool:
    """Stem-sequence presence of a phrase in a document text.

    Accepts a Phrase (its stem_key is used directly) or a raw phrase
    string (stemmed first). Empty phrases are rejected.
    """
    key = phrase.stem_key if isinstance(phrase, Phrase) else phrase_stem_key(phrase)
    if not key:
        raise TextprocError("empty phrase")
    return contains_stem_key(stem_sequence(document_text), key)
