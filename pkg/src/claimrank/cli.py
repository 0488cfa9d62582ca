"""Command-line entry point.

Verbs: ingest, index, import-vectors, analyze, train (mlp | rerank), rank,
eval, qrels, serve. Exit codes: 0 success, 1 validation failure, 2 I/O or
parse error, 3 missing prerequisite artifact.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bm25 as bm25_mod
from .corpus import CorpusError, load_dataset, load_manifest
from .embed import VectorFileError, import_vectors
from .evaluation import evaluate_run, format_report_table, report_to_csv
from .pipeline import ConfigError, Engine, PrerequisiteError, config_from_overrides, load_config
from .runfiles import read_qrels, read_run, write_qrels, write_run
from .textproc import similarity_histogram, write_histogram_tsv

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_PREREQUISITE = 3


def _engine(args) -> Engine:
    overrides = dict(kv.split("=", 1) for kv in (args.set or []))
    config = load_config(args.config, overrides) if args.config else config_from_overrides(overrides)
    return Engine(config)


def cmd_ingest(args) -> int:
    manifest = load_manifest(args.manifest)
    dataset = load_dataset(manifest)
    report = dataset.validate()
    print(f"dataset: {manifest.name}")
    print(report.format())
    return EXIT_OK if report.passed else EXIT_VALIDATION


def cmd_index(args) -> int:
    engine = _engine(args)
    field = args.field or engine.config.base_field
    index = engine.index(field)
    out = Path(args.out) if args.out else Path(f"bm25-{index.field.name}.json")
    bm25_mod.save_index(index, out)
    print(f"indexed {index.doc_count} docs over field {index.field.name!r} -> {out}")
    return EXIT_OK


def cmd_import_vectors(args) -> int:
    store = import_vectors(args.path, expected_dim=args.dim)
    print(f"{args.path}: {len(store)} vectors, dim {store.dim}, encoder {store.encoder_id}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    engine = _engine(args)
    dataset = engine.dataset
    thresholds = [float(t) for t in args.thresholds.split(",")]
    rows = similarity_histogram(dataset.all_pairs, dataset.claims, thresholds)
    for row in rows:
        print(f"threshold {row.threshold:.2f}: {row.count} pairs ({row.percent:.1f}%)")
    if args.out:
        write_histogram_tsv(rows, args.out)
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    engine = _engine(args)
    if args.model == "mlp":
        out = args.out or "mlp-model.json"
        engine.train_article_scorer(out, log_path=args.log)
        print(f"trained article scorer -> {out}")
    else:
        out = args.out or "ranksvm-model.json"
        engine.train_reranker(out)
        print(f"trained reranker -> {out}")
    return EXIT_OK


def _load_queries(args, engine: Engine) -> list[tuple[str, str]]:
    if args.query is not None:
        return [("q1", args.query)]
    queries: dict[str, str] = {}
    with open(args.query_file, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            cells = line.split("\t")
            if len(cells) == 2:  # query_id <TAB> text
                qid, text = cells
            elif len(cells) >= 3:  # pairs file: input_id, verified_id, input_text
                qid, text = cells[0], cells[2]
            else:
                raise CorpusError("expected 2 or 3 TSV columns", path=args.query_file, line=lineno)
            if qid in queries and queries[qid] != text:
                raise CorpusError(f"conflicting texts for query {qid!r}", path=args.query_file, line=lineno)
            queries[qid] = text
    return sorted(queries.items())


def cmd_rank(args) -> int:
    engine = _engine(args)
    queries = _load_queries(args, engine)
    stage = args.stage
    run = engine.batch_rank(queries, stage, args.top_k)
    if args.out:
        write_run(args.out, run, tag=args.tag or f"{engine.config.tag}-{stage}")
        print(f"wrote run for {len(run)} query/queries -> {args.out}")
    if args.query is not None or args.show:
        for qid, items in run.items():
            print(f"# {qid}")
            for item in items[: min(args.top_k, 10)]:
                claim = engine.dataset.claims.get(item.doc_id)
                print(f"{item.rank:>3}  {item.score:>10.4f}  {item.doc_id}  {claim.ver_claim[:70]}")
    return EXIT_OK


def cmd_eval(args) -> int:
    run = read_run(args.run)
    qrels = read_qrels(args.qrels)
    map_cutoffs = tuple(None if c == "all" else int(c) for c in args.map_cutoffs.split(","))
    hp_cutoffs = tuple(int(c) for c in args.hp_cutoffs.split(","))
    report = evaluate_run(run, qrels, map_cutoffs=map_cutoffs, hp_cutoffs=hp_cutoffs,
                          normalizer=args.normalizer)
    label = args.label or Path(args.run).stem
    table = format_report_table({label: report})
    print(table, end="")
    if args.out_table:
        Path(args.out_table).write_text(table, encoding="utf-8")
    if args.out_csv:
        Path(args.out_csv).write_text(report_to_csv({label: report}), encoding="utf-8")
    return EXIT_OK


def cmd_qrels(args) -> int:
    engine = _engine(args)
    qrels = engine.test_qrels() if args.split == "test" else engine.dataset.train_pairs.qrels()
    write_qrels(args.out, qrels)
    print(f"wrote qrels for {len(qrels)} queries -> {args.out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    from .server import make_server, warm_up

    engine = _engine(args)
    warm_up(engine)
    server = make_server(engine, host=args.host, port=args.port)
    print(f"serving on http://{args.host}:{args.port} (POST /rank, GET /health)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="claimrank",
                                     description="Rank fact-checked claims against input claims.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("--config", help="pipeline config file (key = value lines)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable; flags win)")

    p = sub.add_parser("ingest", help="load a dataset manifest and validate counts")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("index", help="build and persist a BM25 index")
    add_config(p)
    p.add_argument("--field", help="field spec, e.g. body or title+verclaim")
    p.add_argument("--out")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("import-vectors", help="validate a vector file")
    p.add_argument("--path", required=True)
    p.add_argument("--dim", type=int, default=None)
    p.set_defaults(func=cmd_import_vectors)

    p = sub.add_parser("analyze", help="pairwise TF.IDF cosine histogram")
    add_config(p)
    p.add_argument("--thresholds", default="0.75,0.50,0.25,0.00")
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("train", help="train the article scorer or the reranker")
    p.add_argument("model", choices=["mlp", "rerank"])
    add_config(p)
    p.add_argument("--out")
    p.add_argument("--log", help="training log CSV (mlp only)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("rank", help="rank the database for one query or a batch")
    add_config(p)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--query")
    group.add_argument("--query-file", help="TSV of (query_id, text) or a pairs file")
    p.add_argument("--stage", default="bm25",
                   help="bm25 | embed | mlp | rerank, optionally with :field")
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--out", help="run file to write")
    p.add_argument("--tag")
    p.add_argument("--show", action="store_true", help="print listings for batch runs too")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("eval", help="evaluate a run file against qrels")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--map-cutoffs", default="1,3,5,10,20,all")
    p.add_argument("--hp-cutoffs", default="1,3,5,10,20,50")
    p.add_argument("--normalizer", choices=["min", "relevant"], default="min")
    p.add_argument("--label")
    p.add_argument("--out-table")
    p.add_argument("--out-csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("qrels", help="export gold links as a qrels file")
    add_config(p)
    p.add_argument("--split", choices=["train", "test"], default="test")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_qrels)

    p = sub.add_parser("serve", help="JSON-over-HTTP ranking endpoint")
    add_config(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CorpusError, ConfigError, VectorFileError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except PrerequisiteError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PREREQUISITE


if __name__ == "__main__":
    sys.exit(main())
