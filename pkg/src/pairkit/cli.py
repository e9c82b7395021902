"""Command-line entry point for the whole pipeline.

One subcommand per pipeline stage: filter, dedup, transfer, topk, match,
compose, score, report. Exit codes: 0 success, 1 usage error, 2 data error,
3 backend failure. Diagnostics go to stderr; data goes to the declared
output paths only.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import __version__
from .embeddings import EmbeddingSet, load_embeddings
from .errors import BackendUnavailable, IoFailure, PairkitError
from .filtering import FilterConfig, dedup_by_caption, filter_pairs
from .manifest import (
    CompositionArm,
    CompositionSpec,
    Manifest,
    compose_datasets,
    read_manifest,
    write_manifest,
)
from .matching import build_topk, load_matrix, save_matrix, select_matched_subset, solve_sparse_assignment
from .meteor import MeteorConfig
from .report import render_report
from .scoring import (
    build_report,
    load_captions,
    load_four_afc,
    load_two_afc,
    load_winoground,
    read_report,
    write_report,
)
from .transfer import (
    BackendPolicy,
    HttpBackend,
    MockBackend,
    default_template,
    load_template,
    run_transfer,
    write_rejections,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BACKEND = 3


class _Parser(argparse.ArgumentParser):
    """argparse uses exit code 2 for usage errors; the contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _progress(args, message: str) -> None:
    if args.verbose:
        print(message, file=sys.stderr)


def _require_inputs(*paths: str | Path | None) -> None:
    # every input path is checked before any work starts
    for p in paths:
        if p is not None and not Path(p).is_file():
            raise IoFailure(f"input file not found: {p}")


def _load_normalized(path: str | Path) -> EmbeddingSet:
    embeddings = load_embeddings(path)
    if not embeddings.normalized:
        raise PairkitError(f"{path}: embeddings are not normalized")
    return embeddings


def _cmd_filter(args) -> int:
    _require_inputs(args.pairs, args.img, args.txt)
    manifest = read_manifest(args.pairs)
    images = _load_normalized(args.img)
    texts = _load_normalized(args.txt)
    config = FilterConfig(
        threshold=args.threshold, image_key=args.image_key, text_key=args.text_key
    )
    kept = filter_pairs(manifest, images, texts, config)
    write_manifest(kept, args.out)
    _progress(args, f"filter: kept {len(kept)} of {len(manifest)} records")
    return EXIT_OK


def _cmd_dedup(args) -> int:
    _require_inputs(args.pairs)
    manifest = read_manifest(args.pairs)
    deduped = dedup_by_caption(manifest)
    write_manifest(deduped, args.out)
    _progress(args, f"dedup: kept {len(deduped)} of {len(manifest)} records")
    return EXIT_OK


def _cmd_transfer(args) -> int:
    _require_inputs(args.pairs, args.template)
    manifest = read_manifest(args.pairs)
    template = load_template(args.template) if args.template else default_template()
    policy = BackendPolicy(
        max_in_flight=args.max_in_flight,
        max_retries=args.max_retries,
        backoff_base=args.backoff,
        timeout=args.timeout,
    )
    if args.backend == "mock":
        backend = MockBackend(seed=args.seed, infeasible_rate=args.infeasible_rate)
    else:
        if not args.endpoint:
            raise IoFailure("--endpoint is required with --backend http")
        backend = HttpBackend(
            endpoint=args.endpoint,
            prompt_field=args.prompt_field,
            response_field=args.response_field,
            timeout=args.timeout,
        )
    transferred, rejections = run_transfer(manifest, backend, template, policy)
    write_manifest(transferred, args.out)
    if args.rejects:
        write_rejections(rejections, args.rejects)
    _progress(
        args,
        f"transfer: {len(transferred)} feasible, {len(rejections)} rejected",
    )
    return EXIT_OK


def _pair_keyed_subset(embeddings: EmbeddingSet, manifest: Manifest, key: str) -> EmbeddingSet:
    import numpy as np

    if len(manifest) == 0:
        rows = np.zeros((0, embeddings.dim), dtype=np.float32)
    else:
        rows = np.stack([embeddings.vector(getattr(rec, key)) for rec in manifest])
    return EmbeddingSet(
        ids=tuple(rec.pair_id for rec in manifest),
        vectors=rows,
        normalized=embeddings.normalized,
    )


def _cmd_topk(args) -> int:
    _require_inputs(args.anchors, args.candidates, args.anchor_pairs, args.candidate_pairs)
    anchors = _load_normalized(args.anchors)
    candidates = _load_normalized(args.candidates)
    if args.anchor_pairs:
        anchors = _pair_keyed_subset(anchors, read_manifest(args.anchor_pairs), args.image_key)
    if args.candidate_pairs:
        candidates = _pair_keyed_subset(
            candidates, read_manifest(args.candidate_pairs), args.image_key
        )
    matrix = build_topk(anchors, candidates, args.k)
    save_matrix(matrix, args.out)
    _progress(
        args,
        f"topk: {matrix.n_rows} x {matrix.n_cols} matrix with {matrix.nnz} entries",
    )
    return EXIT_OK


def _cmd_match(args) -> int:
    _require_inputs(args.matrix, args.candidates)
    matrix = load_matrix(args.matrix)
    manifest = read_manifest(args.candidates)
    assignment = solve_sparse_assignment(matrix, allow_unmatched=args.allow_unmatched)
    selected = select_matched_subset(manifest, assignment, matrix.col_pair_ids)
    write_manifest(selected, args.out)
    if assignment.unmatched_rows:
        print(
            f"match: {len(assignment.unmatched_rows)} rows left unmatched",
            file=sys.stderr,
        )
    if args.assignment:
        doc = {
            "total": assignment.total,
            "mapping": {
                matrix.row_pair_ids[r]: matrix.col_pair_ids[c]
                for r, c in sorted(assignment.mapping.items())
            },
            "unmatched_rows": [matrix.row_pair_ids[r] for r in assignment.unmatched_rows],
        }
        Path(args.assignment).write_text(
            json.dumps(doc, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )
    _progress(args, f"match: selected {len(selected)} records, total {assignment.total:.6f}")
    return EXIT_OK


def _parse_arm(text: str) -> CompositionArm:
    parts = text.rsplit(":", 2)
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"arm {text!r} is not of the form PATH:FRACTION:SEED"
        )
    path, fraction, seed = parts
    try:
        return CompositionArm(path=Path(path), fraction=float(fraction), seed=int(seed))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _cmd_compose(args) -> int:
    _require_inputs(*[arm.path for arm in args.arm])
    composed = compose_datasets(CompositionSpec(arms=tuple(args.arm)))
    write_manifest(composed, args.out)
    _progress(args, f"compose: {len(composed)} records from {len(args.arm)} arms")
    return EXIT_OK


def _cmd_score(args) -> int:
    _require_inputs(
        args.labeled_s, args.vtwt, args.winoground, args.captions, args.img, args.txt
    )
    images = _load_normalized(args.img) if args.img else None
    texts = _load_normalized(args.txt) if args.txt else None
    four_afc = load_four_afc(args.labeled_s, images, texts) if args.labeled_s else None
    two_afc = load_two_afc(args.vtwt, images, texts) if args.vtwt else None
    quads = load_winoground(args.winoground, images, texts) if args.winoground else None
    captions = load_captions(args.captions) if args.captions else None
    stages = tuple(s.strip() for s in args.meteor_stages.split(",") if s.strip())
    config = MeteorConfig(stages=stages)
    report = build_report(
        four_afc=four_afc,
        two_afc=two_afc,
        winoground=quads,
        captions=captions,
        meteor_config=config,
    )
    write_report(report, args.out)
    _progress(args, f"score: wrote {args.out} (counts {dict(report.counts)})")
    return EXIT_OK


def _cmd_report(args) -> int:
    _require_inputs(*args.scores)
    labels = args.labels.split(",") if args.labels else None
    if labels and len(labels) != len(args.scores):
        raise IoFailure("--labels must name each scores file exactly once")
    reports = {}
    for i, path in enumerate(args.scores):
        label = labels[i] if labels else Path(path).stem
        reports[label] = read_report(path)
    created = render_report(reports, args.out_dir)
    _progress(args, "report: wrote " + ", ".join(str(p) for p in created))
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--verbose", action="store_true", help="progress log to stderr")
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pairkit", description=__doc__)
    _add_common(parser)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("filter", help="retain pairs above the similarity threshold")
    _add_common(p)
    p.add_argument("--pairs", required=True)
    p.add_argument("--img", required=True, help="image embeddings (EMB1)")
    p.add_argument("--txt", required=True, help="text embeddings (EMB1)")
    p.add_argument("--threshold", type=float, default=0.2)
    p.add_argument("--image-key", default="image_ref", choices=("pair_id", "image_ref"))
    p.add_argument("--text-key", default="pair_id", choices=("pair_id", "image_ref"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_filter)

    p = sub.add_parser("dedup", help="keep the most similar record per caption")
    _add_common(p)
    p.add_argument("--pairs", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_dedup)

    p = sub.add_parser("transfer", help="rewrite captions via a generation backend")
    _add_common(p)
    p.add_argument("--pairs", required=True)
    p.add_argument("--backend", choices=("mock", "http"), default="mock")
    p.add_argument("--template", default=None, help="prompt template file")
    p.add_argument("--out", required=True)
    p.add_argument("--rejects", default=None, help="rejection log path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--infeasible-rate", type=float, default=0.1)
    p.add_argument("--endpoint", default=None)
    p.add_argument("--prompt-field", default="prompt")
    p.add_argument("--response-field", default=None)
    p.add_argument("--max-in-flight", type=int, default=8)
    p.add_argument("--max-retries", type=int, default=3)
    p.add_argument("--backoff", type=float, default=0.25)
    p.add_argument("--timeout", type=float, default=30.0)
    p.set_defaults(func=_cmd_transfer)

    p = sub.add_parser("topk", help="top-k sparsified similarity matrix")
    _add_common(p)
    p.add_argument("--anchors", required=True, help="anchor embeddings (EMB1)")
    p.add_argument("--candidates", required=True, help="candidate embeddings (EMB1)")
    p.add_argument("--k", type=int, default=1000)
    p.add_argument("--anchor-pairs", default=None, help="manifest selecting/ordering anchors")
    p.add_argument("--candidate-pairs", default=None, help="manifest selecting/ordering candidates")
    p.add_argument("--image-key", default="image_ref", choices=("pair_id", "image_ref"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_topk)

    p = sub.add_parser("match", help="solve the one-to-one assignment")
    _add_common(p)
    p.add_argument("--matrix", required=True, help="STK1 matrix file")
    p.add_argument("--candidates", required=True, help="candidate manifest")
    p.add_argument("--allow-unmatched", action="store_true")
    p.add_argument("--assignment", default=None, help="write the mapping as JSON")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_match)

    p = sub.add_parser("compose", help="union seeded fraction samples of manifests")
    _add_common(p)
    p.add_argument(
        "--arm",
        action="append",
        required=True,
        type=_parse_arm,
        metavar="PATH:FRACTION:SEED",
    )
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_compose)

    p = sub.add_parser("score", help="score benchmark task files into a report")
    _add_common(p)
    p.add_argument("--labeled-s", default=None, help="4-AFC task file")
    p.add_argument("--vtwt", default=None, help="two-word 2-AFC task file")
    p.add_argument("--winoground", default=None, help="quad task file")
    p.add_argument("--captions", default=None, help="caption task file")
    p.add_argument("--img", default=None, help="image embeddings for id slots")
    p.add_argument("--txt", default=None, help="text embeddings for id slots")
    p.add_argument("--meteor-stages", default="exact,stem")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("report", help="render figures and CSV from score reports")
    _add_common(p)
    p.add_argument("--scores", nargs="+", required=True)
    p.add_argument("--labels", default=None, help="comma-separated report labels")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BackendUnavailable as exc:
        print(f"pairkit: backend failure: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (PairkitError, ValueError) as exc:
        print(f"pairkit: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"pairkit: io error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
