from __future__ import annotations

import random
from pathlib import Path

import pytest

from silk import corpus, textproc
from silk.embedding import HashEmbedder

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def fixture_store():
    store, report = corpus.ingest(DATA / "fixture_corpus.jsonl")
    assert report.rejected == 0
    return store


@pytest.fixture(scope="session")
def resolved_store(fixture_store):
    """Store carrying the kept contexts (intro + related_work, no lookup)."""
    store, _ = corpus.collect_contexts(fixture_store, ("intro", "related_work"))
    return store


@pytest.fixture(scope="session")
def tagger():
    return textproc.RuleLexiconTagger.from_file(DATA / "lexicon.tsv")


@pytest.fixture(scope="session")
def stoplist():
    return textproc.Stoplist(entries=textproc.load_stoplist_file(DATA / "stoplist.txt"))


@pytest.fixture(scope="session")
def provider():
    return HashEmbedder(256)


# ---------------------------------------------------------------------------
# synthetic corpus generator (randomized selection-validation documents)
# ---------------------------------------------------------------------------

_NOUNS = [
    "parser", "lattice", "segment", "kernel", "cluster", "tensor", "anchor",
    "lexeme", "manifold", "corpus", "detector", "sampler", "decoder", "encoder",
    "automaton", "ontology", "wavelet", "spectrum", "resolver", "aligner",
    "ledger", "cascade", "gazetteer", "simplex", "codebook", "taxonomy",
]
_ADJS = [
    "sparse", "latent", "robust", "greedy", "coarse", "lexical", "modular",
    "adaptive", "spectral", "minimal", "uniform", "residual",
]


def synthetic_lexicon() -> textproc.RuleLexiconTagger:
    lexicon = {w: "NOUN" for w in _NOUNS}
    lexicon.update({w: "ADJ" for w in _ADJS})
    return textproc.RuleLexiconTagger(lexicon)


def make_synthetic_corpus(n_docs: int, seed: int) -> corpus.CorpusStore:
    """n_docs cited documents, each cited by one generated citing doc.

    Titles/abstracts/contexts are random word compounds, so candidate
    pools vary in size, provenance mix and redundancy structure.
    """
    rng = random.Random(seed)
    records = []
    for i in range(n_docs):
        nouns = rng.sample(_NOUNS, rng.randint(4, 7))
        adjs = rng.sample(_ADJS, rng.randint(1, 3))
        if rng.random() < 0.1:
            # thin candidate pool: often fails the minimum-keyphrase bound
            title = f"{nouns[0].capitalize()} notes"
            abstract_bits = [f"Short notes about the {nouns[0]}."]
        else:
            title = f"{adjs[0].capitalize()} {nouns[0]} {nouns[1]} for {nouns[2]} analysis"
            abstract_bits = [
                f"We study the {adjs[0]} {nouns[0]} {nouns[1]} on real data.",
                f"A {nouns[2]} {nouns[3]} guides the {nouns[0]} construction.",
            ]
            if rng.random() < 0.5 and len(nouns) > 4:
                abstract_bits.append(f"The {adjs[-1]} {nouns[4]} baseline is included.")
        cited = {
            "id": f"s{i:04d}",
            "title": title,
            "abstract": " ".join(abstract_bits),
            "sentences": [],
        }
        sentences = []
        for j in range(rng.randint(1, 3)):
            shuffled = rng.sample(nouns[: min(4, len(nouns))], k=min(3, len(nouns)))
            lead = " ".join(shuffled)
            text = f"The {lead} of {nouns[0]} systems was analysed in "
            anchor = {"start": len(text), "end": len(text) + 3, "target": f"s{i:04d}"}
            text += "[1]."
            sentences.append(
                {"section": "intro", "text": text, "anchors": [anchor]}
            )
        citing = {
            "id": f"c{i:04d}",
            "title": f"Survey {i} of {nouns[0]} methods",
            "abstract": f"We survey {nouns[0]} methods and their uses.",
            "sentences": sentences,
        }
        records.extend([cited, citing])
    import json

    store, report = corpus.ingest(json.dumps(r) for r in records)
    assert report.rejected == 0
    return store
