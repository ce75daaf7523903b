"""Command-line entry point: embed-export --model M --corpus F --out F."""

from __future__ import annotations

import argparse
import sys

from .exporter import CorpusFormatError, ExportJob, ModelLoadError, export_embeddings


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="embed-export", description="Dump [CLS] embeddings of a pretrained Transformer as ood-embed/1 JSON-lines.")
    parser.add_argument("--model", required=True, help="Hugging Face identifier, preset (bert-base, roberta-large, ...) or local model directory")
    parser.add_argument("--corpus", required=True, help="TSV corpus: id, label-or-null, split, text")
    parser.add_argument("--out", required=True)
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--max-length", type=int, default=128)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_request:
        return 0 if exit_request.code == 0 else 1
    job = ExportJob(model=args.model, corpus_path=args.corpus, output_path=args.out, batch_size=args.batch_size, max_length=args.max_length)
    try:
        count = export_embeddings(job)
    except (CorpusFormatError, ModelLoadError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {count} rows -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
