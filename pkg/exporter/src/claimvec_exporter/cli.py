"""claimvec-export command line: export and verify subcommands."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .exporter import DEFAULT_FIELDS, ExportJob, export, verify


def cmd_export(args) -> int:
    job = ExportJob(
        corpus_path=Path(args.corpus),
        out_path=Path(args.out),
        encoder=args.encoder,
        fields=tuple(f.strip() for f in args.fields.split(",") if f.strip()),
        batch_size=args.batch_size,
        flavor=args.format,
        pairs_path=Path(args.pairs) if args.pairs else None,
    )
    count = export(job)
    print(f"wrote {count} vectors ({args.encoder}) -> {args.out}")
    return 0


def cmd_verify(args) -> int:
    report = verify(
        args.file,
        args.corpus,
        fields=tuple(f.strip() for f in args.fields.split(",") if f.strip()),
        pairs_path=Path(args.pairs) if args.pairs else None,
    )
    print(report.format())
    return 0 if report.ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="claimvec-export",
        description="Encode a verified-claim corpus into the engine's vector file format.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export", help="run an encoder over the corpus and write vectors")
    p.add_argument("--corpus", required=True, help="claims JSON-lines file")
    p.add_argument("--out", required=True, help="vector file to write")
    p.add_argument("--encoder", default="hash:256", help="hash:<dim>, st:<model>, or hf:<model>")
    p.add_argument("--fields", default=",".join(DEFAULT_FIELDS))
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--format", choices=["binary", "text"], default="binary")
    p.add_argument("--pairs", help="optional pairs file; also encodes input claims")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("verify", help="check a vector file against its corpus")
    p.add_argument("--file", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--fields", default=",".join(DEFAULT_FIELDS))
    p.add_argument("--pairs")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
