"""Acceptance suite: one test per criterion, one pass/fail line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines as they
print; a failing criterion fails its test.
"""

from __future__ import annotations

import math
import random
import shutil
import time
from pathlib import Path

from scipy import stats as scipy_stats

from silk import corpus, synthesis, textproc
from silk.cli import main
from silk.embedding import HashEmbedder, hash_embed
from silk.evalkit import f1_at_k, f1_at_m, paired_t_test
from silk.porter import stem
from silk.synthesis import (
    SelectionConfig,
    build_candidates,
    mine_corpus,
    rank_documents,
    score_candidates,
    select_keyphrases,
    take_bottom,
    take_random,
    take_top,
)

from .conftest import make_synthetic_corpus, synthetic_lexicon
from .reference import (
    greedy_reference_selection,
    naive_contains,
    naive_cosine,
    naive_f1_at_k,
    naive_f1_at_m,
    validate_selection,
)

DATA = Path(__file__).parent / "data"


def _pass(name: str) -> None:
    print(f"ACCEPTANCE PASS: {name}")


# ---------------------------------------------------------------------------
# 1. scoring oracle on the 20-document fixture corpus
# ---------------------------------------------------------------------------


def test_scoring_oracle_on_fixture(resolved_store, stoplist, tagger, provider):
    started = time.perf_counter()
    combos_seen: set[tuple[float, int]] = set()
    checked = 0
    for doc_id in resolved_store.doc_ids():
        contexts = corpus.contexts_of(resolved_store, doc_id)
        if not contexts:
            continue
        doc = resolved_store[doc_id]
        title_stems = textproc.stem_sequence(doc.title)
        abstract_stems = textproc.stem_sequence(doc.abstract)
        context_stems = [textproc.stem_sequence(c.sentence_text) for c in contexts]
        title_vec = provider.embed_batch([doc.title])[0]
        candidates = build_candidates(resolved_store, doc_id, stoplist, tagger)
        scored = score_candidates(candidates, title_vec, provider)
        for cand in scored:
            needle = cand.phrase.stem_key.split(" ")
            in_title = naive_contains(title_stems, needle)
            in_abstract = naive_contains(abstract_stems, needle)
            freq = sum(1 for stems in context_stems if naive_contains(stems, needle))
            elements = int(in_title) + int(in_abstract) + int(freq > 0)
            alpha = {1: 1.0, 2: 1.5, 3: 2.0}[elements]
            relevance = max(
                0.0, naive_cosine(hash_embed(cand.phrase.surface, 256), title_vec)
            )
            reliability = 1.0 + math.log2(1.0 + freq)
            expected = alpha * relevance * reliability
            assert (cand.in_title, cand.in_abstract, cand.freq_cc) == (in_title, in_abstract, freq)
            assert abs(cand.score - expected) <= 1e-9, cand.phrase.surface
            combos_seen.add((alpha, freq))
            checked += 1
    elapsed = time.perf_counter() - started
    assert {a for a, _ in combos_seen} == {1.0, 1.5, 2.0}
    assert {0, 1, 3} <= {f for _, f in combos_seen}
    assert checked > 100
    assert elapsed < 1.0, f"scoring oracle took {elapsed:.2f}s"
    _pass(f"scoring oracle ({checked} candidates, {elapsed:.2f}s)")


# ---------------------------------------------------------------------------
# 2. selection validator on 500 randomized synthetic documents
# ---------------------------------------------------------------------------


def test_selection_validator_on_500_synthetic_documents(stoplist):
    started = time.perf_counter()
    store = make_synthetic_corpus(500, seed=2024)
    store, _ = corpus.collect_contexts(store, ("intro",))
    tagger = synthetic_lexicon()
    provider = HashEmbedder(128)
    config = SelectionConfig()
    emitted = 0
    dropped = 0
    for doc_id in store.doc_ids():
        if not corpus.contexts_of(store, doc_id):
            continue
        candidates = build_candidates(store, doc_id, stoplist, tagger)
        title_vec = provider.embed_batch([store[doc_id].title])[0]
        scored = score_candidates(candidates, title_vec, provider)
        selected = select_keyphrases(scored, config)
        reference = greedy_reference_selection(scored, config)
        if selected is None:
            assert reference is None
            dropped += 1
            continue
        problems = validate_selection(selected, config)
        assert problems == [], problems
        assert [c.phrase.stem_key for c in selected] == [
            c.phrase.stem_key for c in reference
        ]
        sample = synthesis.make_sample(store[doc_id], selected)
        assert {kp.stem_key for kp in sample.keyphrases} == {
            c.phrase.stem_key for c in selected
        }
        emitted += 1
    elapsed = time.perf_counter() - started
    assert emitted + dropped == 500
    assert emitted >= 200
    assert elapsed < 30.0, f"selection validation took {elapsed:.2f}s"
    _pass(f"selection validator (500 docs, {emitted} samples, {elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# 3. structural replication of the dataset-statistics semantics
# ---------------------------------------------------------------------------


def test_structural_replication_on_fixture(resolved_store, stoplist, tagger, provider):
    samples, report = mine_corpus(resolved_store, stoplist, tagger, provider, SelectionConfig())
    assert samples, "fixture must yield samples"
    for sample in samples:
        assert 3 <= len(sample.keyphrases) <= 5
    kp_counts = [len(s.keyphrases) for s in samples]
    assert 3 <= sum(kp_counts) / len(kp_counts) <= 5
    # absence oracle: contiguous stemmed-sequence scan over the source text
    total = 0
    absent = 0
    for sample in samples:
        stems = textproc.stem_sequence(sample.title + ". " + sample.abstract)
        for kp in sample.keyphrases:
            total += 1
            if not naive_contains(stems, kp.stem_key.split(" ")):
                absent += 1
    assert report.pct_absent == 100.0 * absent / total
    payload = report.to_json()
    assert set(payload) == {"cited_docs", "samples", "dropped_min_kp", "mean_kp_per_doc", "pct_absent"}
    assert report.cited_docs == report.samples + report.dropped_min_kp
    assert report.samples == len(samples)
    _pass(
        f"structural replication (kp/doc={report.mean_kp_per_doc:.2f}, "
        f"pct_absent={report.pct_absent:.1f})"
    )


# ---------------------------------------------------------------------------
# 4. metric oracle
# ---------------------------------------------------------------------------


def test_metric_oracle_brute_force_agreement():
    started = time.perf_counter()
    assert abs(f1_at_m(["a", "b", "c"], ["a", "d"]) - 0.4) < 1e-15
    assert abs(f1_at_k(["a"], ["a"], 5) - (1.0 / 3.0)) < 1e-15
    rng = random.Random(1234)
    universe = [f"kp{i}" for i in range(40)]
    for _ in range(1000):
        gold = rng.sample(universe, rng.randint(1, 12))
        pred = rng.sample(universe, rng.randint(0, 15))
        assert f1_at_m(gold, pred) == naive_f1_at_m(gold, pred)
        for k in (5, 10):
            assert f1_at_k(gold, pred, k) == naive_f1_at_k(gold, pred, k)
    elapsed = time.perf_counter() - started
    assert elapsed < 5.0, f"metric oracle took {elapsed:.2f}s"
    _pass(f"metric oracle (1000 random pairs, {elapsed:.2f}s)")


# ---------------------------------------------------------------------------
# 5. ordering experiment harness
# ---------------------------------------------------------------------------


def _stub_sample(doc_id: str, confidence: float) -> synthesis.SilverSample:
    kp = synthesis.SampleKeyphrase(
        text="kp", surface="kp", stem_key="kp", score=confidence,
        origin="content", present=True,
    )
    return synthesis.SilverSample(
        doc_id=doc_id, title="T", abstract="A", keyphrases=(kp, kp, kp),
        confidence=confidence,
    )


def test_ordering_experiment_harness():
    rng = random.Random(77)
    ranked = rank_documents(
        [_stub_sample(f"doc{i:04d}", rng.random() * 10) for i in range(3000)]
    )
    top = take_top(ranked, 1000)
    bottom = take_bottom(ranked, 1000)
    rnd_a = take_random(ranked, 1000, seed=7)
    rnd_b = take_random(ranked, 1000, seed=7)
    rnd_c = take_random(ranked, 1000, seed=8)
    assert len(top) == len(bottom) == len(rnd_a) == 1000
    assert not ({s.doc_id for s in top} & {s.doc_id for s in bottom})
    assert rnd_a == rnd_b
    assert rnd_a != rnd_c
    # rank order non-increasing under 10,000 permutations
    base = [_stub_sample(f"d{i}", float((i * 13) % 29)) for i in range(40)]
    expected = rank_documents(base)
    for _ in range(10_000):
        rng.shuffle(base)
        ranked = rank_documents(base)
        assert ranked == expected
        assert all(a.confidence >= b.confidence for a, b in zip(ranked, ranked[1:]))
    _pass("ordering harness (top/bottom/random, 10000 permutations)")


# ---------------------------------------------------------------------------
# 6. pipeline determinism (byte-identical reruns, manifests included)
# ---------------------------------------------------------------------------


def _run_chain(workdir: Path) -> dict[str, bytes]:
    out = workdir / "out"
    assert main(["ingest", "--corpus", str(workdir / "corpus.jsonl"),
                 "--out", str(out / "store.jsonl"), "--output-dir", str(out)]) == 0
    assert main(["contexts", "--store", str(out / "store.jsonl"),
                 "--sections", "intro,related_work",
                 "--out", str(out / "contexts.jsonl"),
                 "--store-out", str(out / "store.resolved.jsonl"),
                 "--output-dir", str(out)]) == 0
    assert main(["mine", "--store", str(out / "store.resolved.jsonl"),
                 "--contexts", str(out / "contexts.jsonl"),
                 "--stoplist", str(workdir / "stoplist.txt"),
                 "--lexicon", str(workdir / "lexicon.tsv"),
                 "--embedder", "hash:256",
                 "--out", str(out / "silver.jsonl"), "--output-dir", str(out)]) == 0
    assert main(["emit", "--samples", str(out / "silver.jsonl"),
                 "--out", str(out / "samples.jsonl"), "--output-dir", str(out)]) == 0
    snapshot = {}
    for path in sorted(out.iterdir()):
        snapshot[path.name] = path.read_bytes()
    shutil.rmtree(out)
    return snapshot


def test_pipeline_determinism(tmp_path):
    for name in ("fixture_corpus.jsonl", "lexicon.tsv", "stoplist.txt"):
        shutil.copy(DATA / name, tmp_path / name.replace("fixture_corpus", "corpus"))
    first = _run_chain(tmp_path)
    second = _run_chain(tmp_path)
    assert first.keys() == second.keys()
    for name in first:
        assert first[name] == second[name], f"artifact {name} differs between runs"
    assert any(name.endswith(".manifest.json") for name in first)
    _pass(f"pipeline determinism ({len(first)} artifacts byte-identical)")


# ---------------------------------------------------------------------------
# 7. Porter stemmer reference vocabulary
# ---------------------------------------------------------------------------


def test_porter_reference_vocabulary():
    pairs = [
        line.split("\t")
        for line in (DATA / "porter_pairs.tsv").read_text(encoding="utf-8").splitlines()
    ]
    assert len(pairs) > 5000
    mismatches = sum(1 for word, expected in pairs if stem(word) != expected)
    assert mismatches == 0
    _pass(f"porter stemmer ({len(pairs)} vocabulary words, 100% agreement)")


# ---------------------------------------------------------------------------
# 8. paired t-test against an independent statistical reference
# ---------------------------------------------------------------------------


def test_paired_t_test_reference_agreement():
    rng = random.Random(2718)
    worst = 0.0
    for _ in range(50):
        n = rng.randint(2, 60)
        a = [rng.gauss(0.5, 0.2) for _ in range(n)]
        b = [rng.gauss(0.45, 0.2) for _ in range(n)]
        t, p, df = paired_t_test(a, b)
        t_ref, p_ref = scipy_stats.ttest_rel(a, b)
        assert df == n - 1
        worst = max(worst, abs(p - p_ref))
        assert abs(p - p_ref) <= 1e-6
    _pass(f"paired t-test (50 samples, worst |dp| = {worst:.2e})")
