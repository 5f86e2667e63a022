"""Command-line interface for the embedding extractor."""

from __future__ import annotations

import argparse
import logging
import sys

from .extract import VARIANTS, ExtractorJob, extract_embeddings

logger = logging.getLogger("embex")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="embex")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("extract", help="write EMB1 embeddings for a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--variant", choices=sorted(VARIANTS), default="base")
    p.add_argument("--out", required=True)
    p.add_argument("--audio-root", default=".")
    p.add_argument("--model-dir", default=None,
                   help="local encoder weights directory (skips the hub)")
    p.add_argument("--overwrite", action="store_true")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    job = ExtractorJob(manifest_path=args.manifest, variant=args.variant, out_dir=args.out)
    try:
        written = extract_embeddings(
            job, args.audio_root, model_dir=args.model_dir, overwrite=args.overwrite
        )
    except Exception as exc:
        logger.error("%s", exc)
        return 1
    logger.info("wrote %d embedding files to %s", len(written), args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
