"""Command-line pipeline driver.

Subcommands mirror the pipeline stages:

    silk ingest    corpus JSONL -> normalized store
    silk contexts  store -> kept citation contexts (+ resolved store)
    silk mine      store + contexts -> ranked silver samples
    silk rank      samples -> top/bottom/random subset
    silk emit      samples -> final training JSONL
    silk eval      gold + predictions -> F1 report
    silk stats     docs or samples -> dataset statistics
    silk overlap   predictions x silver samples -> overlap counts

Every artifact gets a sidecar manifest (config hash, input hashes, tool
version); identical inputs and config produce identical bytes. Exit codes:
0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, corpus, evalkit, synthesis, textproc
from .config import ConfigError, RunConfig, load_config, write_manifest
from .embedding import EmbeddingError, build_provider
from .synthesis import SelectionConfig


class CliError(Exception):
    """Validation failure: bad flags, missing files, schema violations."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        raise CliError(message)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML config file")
    parser.add_argument("--dry-run", action="store_true", help="validate inputs, write nothing")
    parser.add_argument("--workers", type=int, help="worker threads for per-document stages")
    parser.add_argument("--output-dir", help="directory for default artifact paths")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="silk", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"silk {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and normalize a corpus JSONL file")
    _add_common(p)
    p.add_argument("--corpus", help="input corpus JSONL")
    p.add_argument("--out", help="normalized store path (default: <output-dir>/store.jsonl)")

    p = sub.add_parser("contexts", help="extract, filter and resolve citation contexts")
    _add_common(p)
    p.add_argument("--store", required=True, help="normalized store JSONL")
    p.add_argument("--sections", help="comma-separated section labels to keep")
    p.add_argument("--allow-external", action="store_true", default=None,
                   help="queue out-of-collection targets for metadata lookup")
    p.add_argument("--lookup-url", help="metadata lookup base URL (or SILK_LOOKUP_URL)")
    p.add_argument("--out", help="contexts path (default: <output-dir>/contexts.jsonl)")
    p.add_argument("--store-out", help="resolved store path (default: <output-dir>/store.resolved.jsonl)")

    p = sub.add_parser("mine", help="score candidates and select silver keyphrases")
    _add_common(p)
    p.add_argument("--store", required=True)
    p.add_argument("--contexts", required=True)
    p.add_argument("--stoplist", help="stoplist file (one normalized phrase per line)")
    p.add_argument("--stoplist-df", type=float, help="also build a stoplist at this document frequency")
    p.add_argument("--embedder", help="hash:<dim> | remote:<url> | file:<path>")
    p.add_argument("--cache", help="embedding cache file wrapping the provider")
    p.add_argument("--lambda-x", type=float, dest="lambda_x")
    p.add_argument("--lambda-r", type=float, dest="lambda_r")
    p.add_argument("--min-kp", type=int, dest="min_kp")
    p.add_argument("--max-kp", type=int, dest="max_kp")
    p.add_argument("--max-content-kp", type=int, dest="max_content_kp")
    p.add_argument("--max-phrase-len", type=int, dest="max_phrase_len")
    p.add_argument("--tagger", choices=("rule", "passthrough"))
    p.add_argument("--lexicon", help="tagger lexicon TSV (word<TAB>tag)")
    p.add_argument("--out", help="ranked samples path (default: <output-dir>/silver.jsonl)")

    p = sub.add_parser("rank", help="take a top/bottom/random subset of ranked samples")
    _add_common(p)
    p.add_argument("--samples", required=True)
    p.add_argument("--top", type=int, required=True, help="subset size N")
    p.add_argument("--order", choices=("top", "bottom", "random"), default="top")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="subset path (default: <output-dir>/silver.<order><N>.jsonl)")

    p = sub.add_parser("emit", help="write the final training JSONL")
    _add_common(p)
    p.add_argument("--samples", required=True)
    p.add_argument("--out", help="final samples path (default: <output-dir>/samples.jsonl)")

    p = sub.add_parser("eval", help="score predictions against gold keyphrases")
    _add_common(p)
    p.add_argument("--gold", required=True, help='JSONL {"id","title","abstract","keyphrases"}')
    p.add_argument("--pred", required=True, help='JSONL {"id","keyphrases"}')
    p.add_argument("--compare", help="second prediction file for the paired t-test")
    p.add_argument("--ks", default="5,10", help="comma-separated F1 cutoffs")
    p.add_argument("--table", action="store_true", help="print the aligned text table")
    p.add_argument("--out", help="report path (default: <output-dir>/eval.json)")

    p = sub.add_parser("stats", help="dataset statistics for docs or samples")
    _add_common(p)
    p.add_argument("--input", required=True, help="gold-docs JSONL or emitted samples JSONL")
    p.add_argument("--out", help="stats path (default: <output-dir>/stats.json)")

    p = sub.add_parser("overlap", help="count predictions found among silver keyphrases")
    _add_common(p)
    p.add_argument("--pred", required=True)
    p.add_argument("--pred-b", help="second system for the overlap delta")
    p.add_argument("--silver", required=True, help="mined samples JSONL")
    p.add_argument("--out", help="overlap path (default: <output-dir>/overlap.json)")

    return parser


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _require_file(path: str | Path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"input file not found: {p}")
    return p


def _config_from_args(args) -> RunConfig:
    override_keys = (
        "corpus", "stoplist", "cache", "output_dir", "lambda_x", "lambda_r",
        "min_kp", "max_kp", "max_content_kp", "max_phrase_len", "stoplist_df",
        "embedder", "seed", "lookup_url", "allow_external", "tagger", "lexicon",
        "workers",
    )
    overrides = {k: getattr(args, k) for k in override_keys if hasattr(args, k)}
    if getattr(args, "sections", None):
        overrides["sections"] = tuple(s.strip() for s in args.sections.split(",") if s.strip())
    if getattr(args, "top", None) is not None:
        overrides["top_n"] = args.top
    try:
        return load_config(args.config, overrides)
    except ConfigError as exc:
        raise CliError(str(exc)) from exc


def _out_path(args, config: RunConfig, default_name: str) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    return Path(config.output_dir) / default_name


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _emit_report(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True))


def _make_tagger(config: RunConfig) -> textproc.Tagger:
    if config.tagger == "passthrough":
        return textproc.PassthroughTagger()
    if config.lexicon:
        return textproc.RuleLexiconTagger.from_file(_require_file(config.lexicon))
    return textproc.RuleLexiconTagger()


def _load_stoplist(config: RunConfig, store: corpus.CorpusStore | None) -> textproc.Stoplist:
    entries: frozenset[str] = frozenset()
    if config.stoplist:
        entries = textproc.load_stoplist_file(_require_file(config.stoplist))
    if config.stoplist_df is not None and store is not None:
        built = textproc.build_stoplist(store, config.stoplist_df, tagger=_make_tagger(config))
        entries = entries | built.entries
    return textproc.Stoplist(entries=entries, df_threshold=config.stoplist_df or 0.0)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_ingest(args, config: RunConfig) -> int:
    if not config.corpus:
        raise CliError("ingest needs --corpus (or corpus= in the config)")
    corpus_path = _require_file(config.corpus)
    out = _out_path(args, config, "store.jsonl")
    if args.dry_run:
        return 0
    store, report = corpus.ingest(corpus_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    corpus.export_store(store, out)
    write_manifest(out, config, [corpus_path], __version__)
    _write_json(Path(str(out) + ".report.json"), report.to_json())
    _emit_report({"documents": len(store), **report.to_json()})
    return 0


def cmd_contexts(args, config: RunConfig) -> int:
    store_path = _require_file(args.store)
    out = _out_path(args, config, "contexts.jsonl")
    store_out = Path(args.store_out) if args.store_out else Path(config.output_dir) / "store.resolved.jsonl"
    if args.dry_run:
        return 0
    store, _ = corpus.ingest(store_path)
    client = None
    if config.allow_external:
        if not config.lookup_url:
            raise CliError("--allow-external needs --lookup-url or SILK_LOOKUP_URL")
        client = corpus.HttpLookupClient(config.lookup_url)
    resolved, report = corpus.collect_contexts(
        store, config.sections, allow_external=config.allow_external, client=client
    )
    out.parent.mkdir(parents=True, exist_ok=True)
    store_out.parent.mkdir(parents=True, exist_ok=True)
    corpus.write_contexts(resolved.contexts, out)
    corpus.export_store(resolved, store_out)
    write_manifest(out, config, [store_path], __version__)
    write_manifest(store_out, config, [store_path], __version__)
    _write_json(Path(str(out) + ".report.json"), report.to_json())
    _emit_report(report.to_json())
    return 0


def cmd_mine(args, config: RunConfig) -> int:
    store_path = _require_file(args.store)
    contexts_path = _require_file(args.contexts)
    out = _out_path(args, config, "silver.jsonl")
    inputs = [store_path, contexts_path]
    if config.stoplist:
        inputs.append(_require_file(config.stoplist))
    if config.lexicon:
        inputs.append(_require_file(config.lexicon))
    if args.dry_run:
        return 0
    store, _ = corpus.ingest(store_path)
    store = store.with_contexts(corpus.read_contexts(contexts_path))
    stoplist = _load_stoplist(config, store)
    provider = build_provider(config.embedder, cache_path=config.cache)
    selection = SelectionConfig(
        lambda_x=config.lambda_x,
        lambda_r=config.lambda_r,
        min_kp=config.min_kp,
        max_kp=config.max_kp,
        max_content_kp=config.max_content_kp,
    )
    samples, report = synthesis.mine_corpus(
        store, stoplist, _make_tagger(config), provider, selection,
        max_phrase_len=config.max_phrase_len,
        alpha_table=config.alpha_table,
        workers=config.workers,
    )
    out.parent.mkdir(parents=True, exist_ok=True)
    synthesis.write_sample_records(samples, out)
    write_manifest(out, config, inputs, __version__)
    _write_json(Path(str(out) + ".report.json"), report.to_json())
    _emit_report(report.to_json())
    return 0


def cmd_rank(args, config: RunConfig) -> int:
    samples_path = _require_file(args.samples)
    out = _out_path(args, config, f"silver.{args.order}{args.top}.jsonl")
    if args.dry_run:
        return 0
    samples = synthesis.rank_documents(synthesis.read_sample_records(samples_path))
    if args.order == "top":
        subset = synthesis.take_top(samples, config.top_n)
    elif args.order == "bottom":
        subset = synthesis.take_bottom(samples, config.top_n)
    else:
        subset = synthesis.take_random(samples, config.top_n, config.seed)
    out.parent.mkdir(parents=True, exist_ok=True)
    synthesis.write_sample_records(subset, out)
    write_manifest(out, config, [samples_path], __version__)
    _emit_report({"input": len(samples), "selected": len(subset), "order": args.order})
    return 0


def cmd_emit(args, config: RunConfig) -> int:
    samples_path = _require_file(args.samples)
    out = _out_path(args, config, "samples.jsonl")
    if args.dry_run:
        return 0
    samples = synthesis.read_sample_records(samples_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    synthesis.emit_samples(samples, out)
    write_manifest(out, config, [samples_path], __version__)
    _emit_report({"samples": len(samples)})
    return 0


def cmd_eval(args, config: RunConfig) -> int:
    gold_path = _require_file(args.gold)
    pred_path = _require_file(args.pred)
    out = _out_path(args, config, "eval.json")
    try:
        ks = tuple(int(k) for k in args.ks.split(","))
    except ValueError as exc:
        raise CliError(f"bad --ks value {args.ks!r}") from exc
    if args.dry_run:
        return 0
    gold_docs = evalkit.read_gold_docs(gold_path)
    docs = evalkit.join_predictions(gold_docs, evalkit.read_pred_map(pred_path))
    report = evalkit.evaluate(docs, ks=ks)
    inputs = [gold_path, pred_path]
    if args.compare:
        compare_path = _require_file(args.compare)
        inputs.append(compare_path)
        docs_b = evalkit.join_predictions(gold_docs, evalkit.read_pred_map(compare_path))
        report_b = evalkit.evaluate(docs_b, ks=ks)
        scores_a = [s["all/f1@M"] for _, s in report.per_doc]
        scores_b = [s["all/f1@M"] for _, s in report_b.per_doc]
        report.significance = evalkit.paired_t_test(scores_a, scores_b)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_json(out, report.to_json())
    write_manifest(out, config, inputs, __version__)
    if args.table:
        print(evalkit.format_table(report))
    _emit_report({"aggregate": report.to_json()["aggregate"]})
    return 0


def _read_stats_input(path: Path) -> list[dict]:
    rows = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        data = json.loads(line)
        if not {"title", "abstract", "keyphrases"} <= set(data):
            raise CliError(f"{path}: record lacks title/abstract/keyphrases")
        rows.append(data)
    return rows


def cmd_stats(args, config: RunConfig) -> int:
    input_path = _require_file(args.input)
    out = _out_path(args, config, "stats.json")
    if args.dry_run:
        return 0
    stats = evalkit.corpus_stats(_read_stats_input(input_path))
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_json(out, stats.to_json())
    write_manifest(out, config, [input_path], __version__)
    _emit_report(stats.to_json())
    return 0


def cmd_overlap(args, config: RunConfig) -> int:
    pred_path = _require_file(args.pred)
    silver_path = _require_file(args.silver)
    out = _out_path(args, config, "overlap.json")
    if args.dry_run:
        return 0
    samples = synthesis.read_sample_records(silver_path)
    preds_a = list(evalkit.read_pred_map(pred_path).values())
    counts_a, total_a = evalkit.silver_overlap(preds_a, samples)
    payload: dict = {"count": total_a, "per_doc": counts_a}
    inputs = [pred_path, silver_path]
    if args.pred_b:
        pred_b_path = _require_file(args.pred_b)
        inputs.append(pred_b_path)
        preds_b = list(evalkit.read_pred_map(pred_b_path).values())
        _, total_b = evalkit.silver_overlap(preds_b, samples)
        payload["count_b"] = total_b
        payload["delta"] = evalkit.overlap_delta(total_a, total_b)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_json(out, payload)
    write_manifest(out, config, inputs, __version__)
    _emit_report(payload)
    return 0


_COMMANDS = {
    "ingest": cmd_ingest,
    "contexts": cmd_contexts,
    "mine": cmd_mine,
    "rank": cmd_rank,
    "emit": cmd_emit,
    "eval": cmd_eval,
    "stats": cmd_stats,
    "overlap": cmd_overlap,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = _config_from_args(args)
        return _COMMANDS[args.command](args, config)
    except CliError as exc:
        print(f"silk: {exc}", file=sys.stderr)
        return 1
    except (corpus.CorpusError, textproc.TextprocError, evalkit.EvalError, ConfigError) as exc:
        print(f"silk: {exc}", file=sys.stderr)
        return 1
    except (EmbeddingError, synthesis.SynthesisError, OSError, json.JSONDecodeError) as exc:
        print(f"silk: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
