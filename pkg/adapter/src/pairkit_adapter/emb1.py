"""Writer/reader for the EMB1 embedding file format.

Layout: magic "EMB1" | dim u32 LE | count u64 LE | flags u8 (bit 0 =
normalized) | id table (u16 byte length + UTF-8 bytes per id) | count x dim
float32 LE payload, row-major, rows in id order. Implemented here against
the published byte layout; the toolkit on the other side of the boundary
has its own implementation.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DuplicateId

MAGIC = b"EMB1"
FLAG_NORMALIZED = 0x01


def write_emb1(
    ids: list[str], vectors: np.ndarray, path: str | Path, normalized: bool = True
) -> None:
    """Write vectors (float32, one row per id); rejects duplicate ids before
    touching the file."""
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    if vectors.ndim != 2 or vectors.shape[0] != len(ids):
        raise ValueError(f"need one row per id, got {vectors.shape} for {len(ids)} ids")
    seen: set[str] = set()
    for ident in ids:
        if ident in seen:
            raise DuplicateId(ident)
        seen.add(ident)
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", vectors.shape[1]))
        fh.write(struct.pack("<Q", len(ids)))
        fh.write(struct.pack("<B", FLAG_NORMALIZED if normalized else 0))
        for ident in ids:
            raw = ident.encode("utf-8")
            if len(raw) > 0xFFFF:
                raise ValueError(f"id too long: {ident[:32]!r}...")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
        fh.write(vectors.tobytes())


def read_emb1(path: str | Path) -> tuple[list[str], np.ndarray, bool]:
    """Read back (ids, vectors, normalized); used by the adapter's own tests."""
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: bad magic {data[:4]!r}")
    (dim,) = struct.unpack_from("<I", data, 4)
    (count,) = struct.unpack_from("<Q", data, 8)
    (flags,) = struct.unpack_from("<B", data, 16)
    offset = 17
    ids = []
    for _ in range(count):
        (length,) = struct.unpack_from("<H", data, offset)
        offset += 2
        ids.append(data[offset : offset + length].decode("utf-8"))
        offset += length
    vectors = np.frombuffer(data, dtype="<f4", count=count * dim, offset=offset)
    return ids, vectors.reshape(count, dim).copy(), bool(flags & FLAG_NORMALIZED)
