"""Low-level helpers for the binary embedding and sparse-matrix formats.

Both formats share the same id-table encoding: a sequence of entries, each a
u16 little-endian byte length followed by that many UTF-8 bytes.
"""

from __future__ import annotations

import struct
from typing import BinaryIO

from .errors import TruncatedFile


def read_exact(fh: BinaryIO, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise TruncatedFile(f"expected {n} bytes for {what}, got {len(data)}")
    return data


def read_id_table(fh: BinaryIO, count: int, what: str) -> tuple[str, ...]:
    ids = []
    for i in range(count):
        (length,) = struct.unpack("<H", read_exact(fh, 2, f"{what} id length {i}"))
        raw = read_exact(fh, length, f"{what} id {i}")
        ids.append(raw.decode("utf-8"))
    return tuple(ids)


def write_id_table(fh: BinaryIO, ids: tuple[str, ...]) -> None:
    for ident in ids:
        raw = ident.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ValueError(f"id {ident[:32]!r}... exceeds 65535 UTF-8 bytes")
        fh.write(struct.pack("<H", len(raw)))
        fh.write(raw)


def expect_eof(fh: BinaryIO, what: str) -> None:
    if fh.read(1):
        raise TruncatedFile(f"trailing bytes after {what} payload")
