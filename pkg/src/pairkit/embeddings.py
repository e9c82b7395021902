"""Bit-exact embedding storage and cosine similarity.

File format (magic "EMB1"): dim u32 LE | count u64 LE | flags u8 (bit 0 =
normalized) | id table (u16 length + UTF-8 bytes per id) | payload of
count x dim f32 LE, row-major, rows in id-table order.

Vectors are stored as float32; dot products accumulate in float64 and are
clamped to [-1, 1].
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .binio import expect_eof, read_exact, read_id_table, write_id_table
from .errors import (
    BadMagic,
    DimensionMismatch,
    DuplicateId,
    NotNormalized,
    TruncatedFile,
    ZeroVector,
)

MAGIC = b"EMB1"
NORM_TOLERANCE = 1e-4
FLAG_NORMALIZED = 0x01


@dataclass(frozen=True)
class EmbeddingSet:
    """Fixed-dimension id-indexed vectors; immutable after construction."""

    ids: tuple[str, ...]
    vectors: np.ndarray  # (len(ids), dim) float32
    normalized: bool = False
    _index: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float32)
        if vectors.ndim != 2:
            raise DimensionMismatch(f"vectors must be 2-D, got shape {vectors.shape}")
        if vectors.shape[0] != len(self.ids):
            raise DimensionMismatch(
                f"{len(self.ids)} ids but {vectors.shape[0]} vector rows"
            )
        if vectors.shape[1] < 1:
            raise DimensionMismatch("dim must be positive")
        vectors = np.ascontiguousarray(vectors)
        vectors.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)
        index: dict[str, int] = {}
        for i, ident in enumerate(self.ids):
            if ident in index:
                raise DuplicateId(ident)
            index[ident] = i
        object.__setattr__(self, "_index", index)
        if self.normalized and len(self.ids):
            norms = np.linalg.norm(vectors.astype(np.float64), axis=1)
            worst = float(np.abs(norms - 1.0).max())
            if worst > NORM_TOLERANCE:
                raise NotNormalized(
                    f"normalized flag set but a norm deviates from 1 by {worst:.2e}"
                )

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, ident: str) -> bool:
        return ident in self._index

    def row(self, ident: str) -> int:
        from .errors import UnknownId

        try:
            return self._index[ident]
        except KeyError:
            raise UnknownId(ident) from None

    def vector(self, ident: str) -> np.ndarray:
        return self.vectors[self.row(ident)]

    def subset(self, ids: tuple[str, ...]) -> "EmbeddingSet":
        """New set restricted to ids, in the given order."""
        rows = [self.row(i) for i in ids]
        return EmbeddingSet(ids=tuple(ids), vectors=self.vectors[rows], normalized=self.normalized)


def load_embeddings(path: str | Path) -> EmbeddingSet:
    """Read an EMB1 file; vectors come back bit-exactly as stored."""
    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise BadMagic(f"{path}: expected magic {MAGIC!r}, got {magic!r}")
        (dim,) = struct.unpack("<I", read_exact(fh, 4, "dim"))
        (count,) = struct.unpack("<Q", read_exact(fh, 8, "count"))
        (flags,) = struct.unpack("<B", read_exact(fh, 1, "flags"))
        if dim < 1:
            raise DimensionMismatch(f"{path}: dim {dim} must be positive")
        ids = read_id_table(fh, count, "embedding")
        payload = read_exact(fh, count * dim * 4, "vector payload")
        expect_eof(fh, "EMB1")
    vectors = np.frombuffer(payload, dtype="<f4").reshape(count, dim)
    return EmbeddingSet(ids=ids, vectors=vectors, normalized=bool(flags & FLAG_NORMALIZED))


def save_embeddings(embeddings: EmbeddingSet, path: str | Path) -> None:
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", embeddings.dim))
        fh.write(struct.pack("<Q", len(embeddings)))
        fh.write(struct.pack("<B", FLAG_NORMALIZED if embeddings.normalized else 0))
        write_id_table(fh, embeddings.ids)
        fh.write(np.ascontiguousarray(embeddings.vectors, dtype="<f4").tobytes())


def normalize(embeddings: EmbeddingSet) -> EmbeddingSet:
    """Scale every vector to unit Euclidean norm; rejects zero vectors."""
    vectors = embeddings.vectors.astype(np.float64)
    norms = np.linalg.norm(vectors, axis=1)
    zero_rows = np.flatnonzero(norms == 0.0)
    if zero_rows.size:
        raise ZeroVector(embeddings.ids[int(zero_rows[0])])
    unit = (vectors / norms[:, None]).astype(np.float32)
    return EmbeddingSet(ids=embeddings.ids, vectors=unit, normalized=True)


def unit_dot(a: np.ndarray, b: np.ndarray) -> float:
    """float64 dot of two unit float32 vectors, clamped to [-1, 1]."""
    value = float(np.dot(a.astype(np.float64), b.astype(np.float64)))
    return min(1.0, max(-1.0, value))


def cosine(embeddings: EmbeddingSet, id_a: str, id_b: str) -> float:
    """Cosine similarity between two ids of a normalized set."""
    if not embeddings.normalized:
        raise NotNormalized("cosine requires a normalized embedding set")
    return unit_dot(embeddings.vector(id_a), embeddings.vector(id_b))
