"""Embedding extraction and task-file export against the toolkit's formats."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .emb1 import write_emb1
from .encoders import AdapterConfig, HashEncoder, make_encoder
from .errors import DuplicateId, EmptyCaption, MissingSample


def read_pair_manifest(path: str | Path) -> list[dict]:
    """Minimal reader for the toolkit's JSONL pair manifests."""
    records = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            obj = json.loads(stripped)
            if not isinstance(obj, dict) or "pair_id" not in obj:
                raise ValueError(f"{path}:{line_no}: not a pair record")
            records.append(obj)
    return records


def _check_unique(ids: Sequence[str]) -> None:
    seen: set[str] = set()
    for ident in ids:
        if ident in seen:
            raise DuplicateId(ident)
        seen.add(ident)


def embed_images(
    images: Sequence[tuple[str, str | Path | bytes]],
    config: AdapterConfig,
    out_path: str | Path,
) -> None:
    """Encode (id, source) images into a unit-normalized EMB1 file."""
    _check_unique([ident for ident, _ in images])
    encoder = make_encoder(config)
    if isinstance(encoder, HashEncoder):
        rows = [encoder.encode_image(ident, source) for ident, source in images]
        vectors = np.stack(rows) if rows else np.zeros((0, encoder.dim), np.float32)
    else:
        from PIL import Image

        loaded = [Image.open(source).convert("RGB") for _, source in images]
        vectors = encoder.encode_images(loaded)
    write_emb1([ident for ident, _ in images], vectors, out_path, normalized=True)


def embed_texts(
    captions: Sequence[tuple[str, str]],
    config: AdapterConfig,
    out_path: str | Path,
) -> None:
    """Encode (id, caption) pairs into a unit-normalized EMB1 file."""
    _check_unique([ident for ident, _ in captions])
    for ident, caption in captions:
        if not caption.strip():
            raise EmptyCaption(ident)
    encoder = make_encoder(config)
    if isinstance(encoder, HashEncoder):
        rows = [encoder.encode_text(ident, caption) for ident, caption in captions]
        vectors = np.stack(rows) if rows else np.zeros((0, encoder.dim), np.float32)
    else:
        vectors = encoder.encode_texts([caption for _, caption in captions])
    write_emb1([ident for ident, _ in captions], vectors, out_path, normalized=True)


# --- task export --------------------------------------------------------------

TASKS = ("four_afc", "two_afc", "winoground", "caption")

_OUTPUT_FIELDS = {
    "four_afc": ("candidate_scores",),
    "two_afc": ("pos_score", "neg_score"),
    "winoground": ("s_pp", "s_pn", "s_np", "s_nn"),
    "caption": ("candidate",),
}

_SAMPLE_FIELDS = {
    "four_afc": ("sample_id", "label", "correct_index"),
    "two_afc": ("sample_id", "diff_type"),
    "winoground": ("sample_id",),
    "caption": ("sample_id", "reference"),
}


def _read_jsonl(path: str | Path) -> list[dict]:
    rows = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            stripped = line.strip()
            if stripped:
                rows.append(json.loads(stripped))
    return rows


def export_scores(
    samples: Iterable[Mapping],
    outputs: Mapping[str, Mapping],
    task: str,
    out_path: str | Path,
) -> int:
    """Merge model outputs into task records the scorers consume.

    Every sample must have an output (MissingSample otherwise); extra
    outputs are ignored. Returns the number of records written.
    """
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}; expected one of {TASKS}")
    sample_fields = _SAMPLE_FIELDS[task]
    output_fields = _OUTPUT_FIELDS[task]
    written = 0
    with Path(out_path).open("w", encoding="utf-8", newline="\n") as fh:
        for sample in samples:
            sample_id = str(sample["sample_id"])
            if sample_id not in outputs:
                raise MissingSample(sample_id)
            output = outputs[sample_id]
            record: dict = {}
            for name in sample_fields:
                if name not in sample:
                    raise ValueError(f"sample {sample_id!r} lacks field {name!r}")
                record[name] = sample[name]
            for name in output_fields:
                if name not in output:
                    raise ValueError(
                        f"output for {sample_id!r} lacks field {name!r}"
                    )
                record[name] = output[name]
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            written += 1
    return written


def export_scores_from_files(
    samples_path: str | Path, outputs_path: str | Path, task: str, out_path: str | Path
) -> int:
    samples = _read_jsonl(samples_path)
    outputs = {str(row["sample_id"]): row for row in _read_jsonl(outputs_path)}
    return export_scores(samples, outputs, task, out_path)
