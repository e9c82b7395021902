"""Threshold retention and per-caption dedup for pair manifests.

Filtering keeps records whose image-text cosine lies strictly above the
threshold (the dataset-quality gate), stamping the computed similarity on
every survivor. Dedup keeps, per distinct normalized caption, the record
with the highest similarity.
"""

from __future__ import annotations

from dataclasses import dataclass

from .embeddings import EmbeddingSet, unit_dot
from .errors import MissingSimilarity, NotNormalized, UnknownId
from .manifest import Manifest, PairRecord

_RECORD_KEYS = ("pair_id", "image_ref", "caption", "source")


@dataclass(frozen=True)
class FilterConfig:
    """threshold plus the record fields holding the embedding lookup ids."""

    threshold: float = 0.2
    image_key: str = "image_ref"
    text_key: str = "pair_id"

    def __post_init__(self):
        if not -1.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold {self.threshold} outside [-1, 1]")
        for key in (self.image_key, self.text_key):
            if key not in _RECORD_KEYS:
                raise ValueError(f"unknown record field {key!r}")


def _lookup_id(record: PairRecord, key: str) -> str:
    return getattr(record, key)


def filter_pairs(
    manifest: Manifest,
    images: EmbeddingSet,
    texts: EmbeddingSet,
    config: FilterConfig,
) -> Manifest:
    """Retain records with cosine(image, caption) strictly above the threshold.

    Survivors carry their computed cosine in the similarity field; relative
    order is preserved. Unresolvable embedding ids raise UnknownId with the
    offending record's pair_id.
    """
    if not images.normalized or not texts.normalized:
        raise NotNormalized("filter_pairs requires normalized embedding sets")
    kept: list[PairRecord] = []
    for record in manifest:
        image_id = _lookup_id(record, config.image_key)
        text_id = _lookup_id(record, config.text_key)
        if image_id not in images or text_id not in texts:
            raise UnknownId(record.pair_id)
        similarity = unit_dot(images.vector(image_id), texts.vector(text_id))
        if similarity > config.threshold:
            kept.append(record.with_similarity(similarity))
    return Manifest(
        tuple(kept),
        provenance=f"{manifest.provenance} | filter(threshold={config.threshold})",
    )


def normalize_caption(caption: str) -> str:
    """Grouping key for dedup: lowercased, whitespace collapsed to single spaces."""
    return " ".join(caption.lower().split())


def dedup_by_caption(manifest: Manifest) -> Manifest:
    """Keep one record per distinct normalized caption: the most similar one.

    Ties go to the lexicographically smallest pair_id. Output is sorted by
    pair_id. Every record must carry a similarity.
    """
    best: dict[str, PairRecord] = {}
    for record in manifest:
        if record.similarity is None:
            raise MissingSimilarity(record.pair_id)
        key = normalize_caption(record.caption)
        incumbent = best.get(key)
        if (
            incumbent is None
            or record.similarity > incumbent.similarity
            or (record.similarity == incumbent.similarity and record.pair_id < incumbent.pair_id)
        ):
            best[key] = record
    kept = sorted(best.values(), key=lambda r: r.pair_id)
    return Manifest(tuple(kept), provenance=f"{manifest.provenance} | dedup_by_caption")
