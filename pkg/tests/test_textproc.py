from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from silk import corpus, textproc
from silk.textproc import (
    PassthroughTagger,
    RuleLexiconTagger,
    Stoplist,
    TextprocError,
    Token,
    analyze,
    build_stoplist,
    chunk_noun_phrases,
    is_present,
    lemmatize,
    tokenize,
)

from .reference import naive_contains, naive_noun_phrase_spans

# ---------------------------------------------------------------------------
# tokenize
# ---------------------------------------------------------------------------


def surfaces(text):
    return [t.surface for t in tokenize(text)]


def test_tokenize_keeps_intraword_hyphens():
    assert surfaces("pointer-generator networks") == ["pointer-generator", "networks"]


def test_tokenize_empty():
    assert tokenize("") == []


def test_tokenize_punctuation_separate():
    assert surfaces("CNN / Daily Mail") == ["CNN", "/", "Daily", "Mail"]


def test_tokenize_deterministic():
    text = "Sparse graph-based parsing, re-examined (again)."
    assert surfaces(text) == surfaces(text)


# ---------------------------------------------------------------------------
# tagging
# ---------------------------------------------------------------------------


def test_lexicon_lookup():
    tagger = RuleLexiconTagger({"neural": "ADJ", "networks": "NOUN"})
    assert tagger.tag_surfaces(["neural", "networks"]) == ["ADJ", "NOUN"]


def test_suffix_rule_tion():
    tagger = RuleLexiconTagger()
    assert tagger.tag_surfaces(["lemmatization"]) == ["NOUN"]


def test_unknown_word_is_other():
    tagger = RuleLexiconTagger()
    assert tagger.tag_surfaces(["zorgle"]) == ["OTHER"]


def test_plural_inherits_lexicon_tag():
    tagger = RuleLexiconTagger({"network": "NOUN"})
    assert tagger.tag_surfaces(["networks"]) == ["NOUN"]


def test_bad_lexicon_tag_rejected():
    with pytest.raises(TextprocError):
        RuleLexiconTagger({"walk": "VERB"})


def test_passthrough_requires_supplied_tags():
    with pytest.raises(TextprocError):
        PassthroughTagger().tag_surfaces(["a", "b"], supplied=None)


def test_passthrough_uses_supplied_tags():
    supplied = [("neural", "ADJ"), ("nets", "NOUN")]
    assert PassthroughTagger().tag_surfaces(["neural", "nets"], supplied) == ["ADJ", "NOUN"]


def test_passthrough_misaligned_tokens_error():
    with pytest.raises(TextprocError):
        PassthroughTagger().tag_surfaces(["neural"], [("other", "ADJ")])


# ---------------------------------------------------------------------------
# lemmatize
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "surface,pos,lemma",
    [
        ("networks", "NOUN", "network"),
        ("analyses", "NOUN", "analysis"),
        ("neural", "ADJ", "neural"),
        ("studies", "NOUN", "study"),
        ("classes", "NOUN", "class"),
        ("series", "NOUN", "series"),
        ("corpus", "NOUN", "corpus"),
        ("statistics", "NOUN", "statistics"),
        ("Walked", "OTHER", "walked"),
    ],
)
def test_lemmatize(surface, pos, lemma):
    assert lemmatize(Token(surface=surface, pos=pos)) == lemma


# ---------------------------------------------------------------------------
# chunking
# ---------------------------------------------------------------------------


def toks(*pairs):
    tagger = RuleLexiconTagger(dict(pairs))
    return analyze(" ".join(p[0] for p in pairs), tagger)


def test_chunk_suffix_enumeration():
    tokens = toks(("neural", "ADJ"), ("machine", "NOUN"), ("translation", "NOUN"))
    got = {p.normalized for p in chunk_noun_phrases(tokens)}
    assert got == {"neural machine translation", "machine translation", "translation"}


def test_chunk_stoplist_removes_whole_phrase():
    tokens = toks(("data", "NOUN"))
    stoplist = Stoplist(entries=frozenset({"data"}))
    assert chunk_noun_phrases(tokens, stoplist) == []


def test_chunk_tolerates_mistagged_noun():
    tokens = [Token("we", "OTHER", "we", "we"), Token("propose", "NOUN", "propose", "propos")]
    got = {p.normalized for p in chunk_noun_phrases(tokens)}
    assert got == {"propose"}


def test_chunk_respects_max_phrase_len():
    tokens = toks(*[(w, "NOUN") for w in ("alpha", "beta", "gamma", "delta")])
    got = {p.surface for p in chunk_noun_phrases(tokens, max_phrase_len=2)}
    assert got == {"gamma delta", "delta"}


def test_chunk_never_contains_other(resolved_store, tagger):
    for doc in resolved_store.documents():
        for sentence in doc.sentences:
            tokens = analyze(sentence.text, tagger)
            by_surface = {t.surface: t.pos for t in tokens}
            for phrase in chunk_noun_phrases(tokens):
                for word in phrase.surface.split(" "):
                    assert by_surface[word] != "OTHER"


def test_chunked_phrases_are_present_in_their_sentence(resolved_store, tagger):
    for doc in resolved_store.documents():
        for text in (doc.title, doc.abstract, *(s.text for s in doc.sentences)):
            for phrase in chunk_noun_phrases(analyze(text, tagger)):
                assert is_present(phrase, text)


@given(
    tags=st.lists(st.sampled_from(["ADJ", "NOUN", "OTHER"]), min_size=0, max_size=12)
)
@settings(max_examples=300, deadline=None)
def test_chunk_matches_naive_span_enumeration(tags):
    words = [f"w{i}" for i in range(len(tags))]
    tokens = [Token(w, pos, w, w) for w, pos in zip(words, tags)]
    got = {p.surface for p in chunk_noun_phrases(tokens, max_phrase_len=len(tags) or 1)}
    expected = {
        " ".join(words[i : j + 1]) for i, j in naive_noun_phrase_spans(tags)
    }
    assert got == expected


# ---------------------------------------------------------------------------
# stoplist construction
# ---------------------------------------------------------------------------


def _mini_store(titles_abstracts):
    import json

    records = [
        json.dumps(
            {"id": f"m{i}", "title": t, "abstract": a, "sentences": []}
        )
        for i, (t, a) in enumerate(titles_abstracts)
    ]
    store, _ = corpus.ingest(records)
    return store


def test_stoplist_threshold_rule():
    tagger = RuleLexiconTagger({"graph": "NOUN", "tree": "NOUN"})
    store = _mini_store(
        [
            ("graph methods", "the graph again"),
            ("graph search", "more graph text"),
            ("tree search", "about a tree"),
            ("tree pruning", "a tree appears"),
            ("graph pruning", "graph once more"),
        ]
    )
    stoplist = build_stoplist(store, 0.5, tagger=tagger)
    assert "graph" in stoplist  # 3/5 docs
    assert "tree" not in stoplist  # 2/5 docs


def test_stoplist_threshold_above_one_keeps_only_file(tmp_path):
    extra = tmp_path / "extra.txt"
    extra.write_text("manual entry\n# comment\n", encoding="utf-8")
    tagger = RuleLexiconTagger({"graph": "NOUN"})
    store = _mini_store([("graph methods", "the graph again")])
    stoplist = build_stoplist(store, 1.01, extra_file=extra, tagger=tagger)
    assert stoplist.entries == frozenset({"manual entry"})


def test_stoplist_empty_store():
    store, _ = corpus.ingest([])
    assert build_stoplist(store, 0.1).entries == frozenset()


def test_stoplist_monotone_in_threshold():
    tagger = RuleLexiconTagger({"graph": "NOUN", "tree": "NOUN", "node": "NOUN"})
    store = _mini_store(
        [
            ("graph tree node", "graph tree"),
            ("graph methods", "tree search"),
            ("graph pruning", "node search"),
        ]
    )
    previous: frozenset[str] = frozenset()
    for threshold in (1.0, 0.6, 0.3, 0.0):
        entries = build_stoplist(store, threshold, tagger=tagger).entries
        assert previous <= entries
        previous = entries


def test_stoplist_unreadable_file_errors(tmp_path):
    with pytest.raises(TextprocError):
        textproc.load_stoplist_file(tmp_path / "missing.txt")


# ---------------------------------------------------------------------------
# stem presence
# ---------------------------------------------------------------------------


def test_presence_matches_across_inflection():
    assert is_present("keyphrase generation", "Good keyphrases generated from text.")


def test_presence_false_when_absent():
    assert not is_present("graph parsing", "A study of molecule synthesis.")


def test_presence_empty_phrase_errors():
    with pytest.raises(TextprocError):
        is_present("", "some text")


def test_presence_requires_contiguity():
    # both words occur, never adjacently
    assert not is_present("graph pruning", "The graph of the tree needs pruning rules.")


def test_presence_agrees_with_naive_scan(resolved_store, tagger):
    for doc in resolved_store.documents():
        text = doc.title + ". " + doc.abstract
        stems = textproc.stem_sequence(text)
        for phrase in chunk_noun_phrases(analyze(doc.title, tagger)):
            expected = naive_contains(stems, phrase.stem_key.split(" "))
            assert textproc.contains_stem_key(stems, phrase.stem_key) == expected


def test_phrase_invariants(resolved_store, tagger):
    for doc in resolved_store.documents():
        for phrase in chunk_noun_phrases(analyze(doc.abstract, tagger)):
            assert 1 <= len(phrase.stem_key.split(" ")) <= textproc.DEFAULT_MAX_PHRASE_LEN
            assert phrase.normalized == phrase.normalized.lower()


def test_analyze_token_invariants(tagger):
    for token in analyze("Stacked parsers use beam search widely.", tagger):
        assert token.pos in textproc.POS_TAGS
        assert token.lemma
        assert token.stem == textproc.word_stem(token.surface)
