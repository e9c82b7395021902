"""Pair manifests: the dataset currency of the toolkit.

A manifest is a UTF-8 JSONL file, one image-caption pair per line, with the
fields pair_id, image_ref, caption, source and an optional similarity.
Unknown fields are rejected. Composition unions seeded fraction samples of
several manifests into one deterministic, pair_id-sorted dataset.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DuplicatePairId, IoFailure, MalformedLine

SOURCES = ("saycam", "transferred", "general", "synthetic")

_REQUIRED_FIELDS = ("pair_id", "image_ref", "caption", "source")
_ALL_FIELDS = _REQUIRED_FIELDS + ("similarity",)


@dataclass(frozen=True)
class PairRecord:
    """One image-caption pair. image_ref is opaque (path or content hash)."""

    pair_id: str
    image_ref: str
    caption: str
    source: str
    similarity: float | None = None

    def __post_init__(self):
        if not self.pair_id:
            raise ValueError("pair_id must be non-empty")
        if not self.caption:
            raise ValueError(f"record {self.pair_id!r}: caption must be non-empty")
        if self.source not in SOURCES:
            raise ValueError(
                f"record {self.pair_id!r}: source {self.source!r} not one of {SOURCES}"
            )
        if self.similarity is not None and not -1.0 <= self.similarity <= 1.0:
            raise ValueError(
                f"record {self.pair_id!r}: similarity {self.similarity} outside [-1, 1]"
            )

    def with_similarity(self, similarity: float | None) -> "PairRecord":
        return replace(self, similarity=similarity)


@dataclass(frozen=True)
class Manifest:
    """Ordered pair records plus a free-text provenance trail."""

    records: tuple[PairRecord, ...]
    provenance: str = ""

    def __post_init__(self):
        seen: set[str] = set()
        for rec in self.records:
            if rec.pair_id in seen:
                raise DuplicatePairId(rec.pair_id)
            seen.add(rec.pair_id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def by_id(self, pair_id: str) -> PairRecord:
        for rec in self.records:
            if rec.pair_id == pair_id:
                return rec
        raise KeyError(pair_id)

    def sorted_by_id(self) -> "Manifest":
        ordered = tuple(sorted(self.records, key=lambda r: r.pair_id))
        return Manifest(ordered, self.provenance)


@dataclass(frozen=True)
class CompositionArm:
    path: Path
    fraction: float
    seed: int

    def __post_init__(self):
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError(f"fraction {self.fraction} outside (0, 1]")
        if self.seed < 0:
            raise ValueError(f"seed {self.seed} must be non-negative")


@dataclass(frozen=True)
class CompositionSpec:
    arms: tuple[CompositionArm, ...]


def _record_from_obj(obj: object, line_no: int) -> PairRecord:
    if not isinstance(obj, dict):
        raise MalformedLine(line_no, "record is not an object")
    unknown = set(obj) - set(_ALL_FIELDS)
    if unknown:
        raise MalformedLine(line_no, f"unknown fields {sorted(unknown)}")
    missing = [name for name in _REQUIRED_FIELDS if name not in obj]
    if missing:
        raise MalformedLine(line_no, f"missing fields {missing}")
    for name in _REQUIRED_FIELDS:
        if not isinstance(obj[name], str):
            raise MalformedLine(line_no, f"field {name!r} is not a string")
    similarity = obj.get("similarity")
    if similarity is not None:
        if isinstance(similarity, bool) or not isinstance(similarity, (int, float)):
            raise MalformedLine(line_no, "field 'similarity' is not a number")
        similarity = float(similarity)
    try:
        return PairRecord(
            pair_id=obj["pair_id"],
            image_ref=obj["image_ref"],
            caption=obj["caption"],
            source=obj["source"],
            similarity=similarity,
        )
    except ValueError as exc:
        raise MalformedLine(line_no, str(exc)) from exc


def read_manifest(path: str | Path) -> Manifest:
    """Parse a JSONL manifest, preserving file order.

    Raises MalformedLine with a 1-based line number for unparseable or
    invalid lines and DuplicatePairId on repeated ids.
    """
    path = Path(path)
    records: list[PairRecord] = []
    seen: set[str] = set()
    try:
        with path.open("r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                stripped = line.strip()
                if not stripped:
                    continue
                try:
                    obj = json.loads(stripped)
                except json.JSONDecodeError as exc:
                    raise MalformedLine(line_no, f"invalid JSON: {exc.msg}") from exc
                rec = _record_from_obj(obj, line_no)
                if rec.pair_id in seen:
                    raise DuplicatePairId(rec.pair_id)
                seen.add(rec.pair_id)
                records.append(rec)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return Manifest(tuple(records), provenance=f"read({path})")


def _record_to_json(rec: PairRecord) -> str:
    obj = {
        "pair_id": rec.pair_id,
        "image_ref": rec.image_ref,
        "caption": rec.caption,
        "source": rec.source,
    }
    if rec.similarity is not None:
        obj["similarity"] = rec.similarity
    return json.dumps(obj, ensure_ascii=False)


def write_manifest(manifest: Manifest, path: str | Path) -> None:
    """Write JSONL with LF endings; read_manifest round-trips record-for-record."""
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            for rec in manifest.records:
                fh.write(_record_to_json(rec))
                fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _sample_records(records: Sequence[PairRecord], fraction: float, seed: int) -> list[PairRecord]:
    # Seeded permutation, then a prefix: reproducible without-replacement draw.
    take = math.floor(fraction * len(records))
    indices = list(range(len(records)))
    random.Random(seed).shuffle(indices)
    return [records[i] for i in sorted(indices[:take])]


def compose_datasets(spec: CompositionSpec) -> Manifest:
    """Union seeded fraction samples of each arm, sorted by pair_id.

    Each arm contributes floor(fraction * len) records drawn without
    replacement. A pair_id appearing in two arms is an error.
    """
    chosen: list[PairRecord] = []
    seen: set[str] = set()
    arm_notes: list[str] = []
    for arm in spec.arms:
        manifest = read_manifest(arm.path)
        sampled = _sample_records(manifest.records, arm.fraction, arm.seed)
        for rec in sampled:
            if rec.pair_id in seen:
                raise DuplicatePairId(rec.pair_id)
            seen.add(rec.pair_id)
            chosen.append(rec)
        arm_notes.append(f"{arm.path}:fraction={arm.fraction}:seed={arm.seed}")
    chosen.sort(key=lambda r: r.pair_id)
    return Manifest(tuple(chosen), provenance="compose(" + ", ".join(arm_notes) + ")")
