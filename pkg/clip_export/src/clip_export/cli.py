"""Command-line front end: ``clip-export text`` / ``clip-export images``."""

from __future__ import annotations

import argparse
import sys

from .exporter import DEFAULT_MODEL, EncoderUnavailableError, export_image_embeddings, export_text_embeddings
from .format import ExportError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clip-export",
        description="Encode prompts or images with a pretrained contrastive "
        "encoder and write CROFEMB1 embedding files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    text = sub.add_parser("text", help="encode prompt strings")
    text.add_argument("prompts", nargs="+", help="prompt strings, one row each")
    images = sub.add_parser("images", help="encode image files")
    images.add_argument("paths", nargs="+", help="image files, one row each")
    for p in (text, images):
        p.add_argument("--out", required=True, help="output .emb file")
        p.add_argument("--model", default=DEFAULT_MODEL, help=f"encoder checkpoint (default {DEFAULT_MODEL})")
        p.add_argument("--raw", action="store_true", help="skip L2 normalization of output rows")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "text":
            out = export_text_embeddings(args.prompts, args.out, model=args.model, normalize=not args.raw)
        else:
            out = export_image_embeddings(args.paths, args.out, model=args.model, normalize=not args.raw)
    except EncoderUnavailableError as exc:
        print(f"clip-export: environment error: {exc}", file=sys.stderr)
        return 2
    except (ExportError, FileNotFoundError) as exc:
        print(f"clip-export: error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
