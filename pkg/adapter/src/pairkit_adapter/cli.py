"""pairkit-adapter command line: embed-images, embed-texts, export-scores."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .encoders import AdapterConfig
from .errors import AdapterError
from .export import (
    TASKS,
    embed_images,
    embed_texts,
    export_scores_from_files,
    read_pair_manifest,
)


_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".gif", ".webp")


def _images_from_args(args) -> list[tuple[str, Path]]:
    if args.pairs:
        root = Path(args.image_root) if args.image_root else Path(".")
        records = read_pair_manifest(args.pairs)
        return [(rec[args.id_key], root / rec["image_ref"]) for rec in records]
    directory = Path(args.images_dir)
    files = sorted(
        p
        for p in directory.iterdir()
        if p.is_file() and p.suffix.lower() in _IMAGE_SUFFIXES
    )
    return [(p.name, p) for p in files]


def _cmd_embed_images(args) -> int:
    config = AdapterConfig(
        encoder=args.encoder, device=args.device, batch_size=args.batch_size, dim=args.dim
    )
    embed_images(_images_from_args(args), config, args.out)
    return 0


def _cmd_embed_texts(args) -> int:
    config = AdapterConfig(
        encoder=args.encoder, device=args.device, batch_size=args.batch_size, dim=args.dim
    )
    if args.pairs:
        records = read_pair_manifest(args.pairs)
        captions = [(rec[args.id_key], rec["caption"]) for rec in records]
    else:
        captions = []
        with Path(args.captions_tsv).open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if line:
                    ident, caption = line.split("\t", 1)
                    captions.append((ident, caption))
    embed_texts(captions, config, args.out)
    return 0


def _cmd_export_scores(args) -> int:
    count = export_scores_from_files(args.samples, args.outputs, args.task, args.out)
    print(f"wrote {count} {args.task} records", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pairkit-adapter", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_encoder_flags(p):
        p.add_argument("--encoder", default="hash", help="hash, hash:<dim>, clip:<model>")
        p.add_argument("--device", default="cpu")
        p.add_argument("--batch-size", type=int, default=16)
        p.add_argument("--dim", type=int, default=256, help="hash encoder dimension")

    p = sub.add_parser("embed-images", help="write an EMB1 file for images")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--pairs", help="pair manifest naming images via image_ref")
    group.add_argument("--images-dir", help="directory of image files")
    p.add_argument("--image-root", default=None, help="base directory for image_ref")
    p.add_argument("--id-key", default="image_ref", choices=("pair_id", "image_ref"))
    add_encoder_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_embed_images)

    p = sub.add_parser("embed-texts", help="write an EMB1 file for captions")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--pairs", help="pair manifest supplying captions")
    group.add_argument("--captions-tsv", help="id<TAB>caption lines")
    p.add_argument("--id-key", default="pair_id", choices=("pair_id", "image_ref"))
    add_encoder_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_embed_texts)

    p = sub.add_parser("export-scores", help="merge model outputs into task files")
    p.add_argument("--task", required=True, choices=TASKS)
    p.add_argument("--samples", required=True, help="task samples without scores")
    p.add_argument("--outputs", required=True, help="model outputs keyed by sample_id")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export_scores)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (AdapterError, ValueError, OSError) as exc:
        print(f"pairkit-adapter: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
