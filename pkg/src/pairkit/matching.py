"""Top-k sparsified similarity matrices and exact one-to-one assignment.

build_topk keeps, per anchor, the k most similar candidates (cosine).
solve_sparse_assignment finds the injective anchor-to-candidate mapping of
maximum total similarity over the stored entries only: absent entries are
infeasible edges, not zero-valued ones. The solver is a successive
shortest augmenting path method (Jonker-Volgenant family) with float64
potentials; dense_oracle is the brute-force reference it is tested against.

File format (magic "STK1"): n_rows u64 LE | n_cols u64 LE | k u32 LE |
row_offsets (n_rows+1) u64 | col_ids u64 per entry | values f32 per entry |
row id table | col id table (id tables as in EMB1).
"""

from __future__ import annotations

import itertools
import struct
from dataclasses import dataclass
from heapq import heappop, heappush
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .binio import expect_eof, read_exact, read_id_table, write_id_table
from .embeddings import EmbeddingSet
from .errors import (
    BadMagic,
    DimensionMismatch,
    EmptyMatrix,
    NoPerfectMatching,
    NotNormalized,
    TooLarge,
    UnknownColumn,
)
from .manifest import Manifest

MAGIC = b"STK1"

# Rows per matmul chunk are sized so one float64 similarity block stays small.
_CHUNK_ELEMENTS = 4 << 20


@dataclass(frozen=True)
class SparseTopKMatrix:
    """Row-compressed anchor x candidate similarities, at most k per row.

    Within each row, entries are sorted by descending value, ties broken by
    ascending column index. row_pair_ids/col_pair_ids map indices back to
    manifest pair_ids when the matrix came from build_topk or a file.
    """

    n_rows: int
    n_cols: int
    k: int
    row_offsets: np.ndarray  # uint64, len n_rows + 1
    col_ids: np.ndarray  # uint64 per entry
    values: np.ndarray  # float32 per entry, in [-1, 1]
    row_pair_ids: tuple[str, ...] | None = None
    col_pair_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        offsets = np.ascontiguousarray(self.row_offsets, dtype=np.uint64)
        cols = np.ascontiguousarray(self.col_ids, dtype=np.uint64)
        values = np.ascontiguousarray(self.values, dtype=np.float32)
        object.__setattr__(self, "row_offsets", offsets)
        object.__setattr__(self, "col_ids", cols)
        object.__setattr__(self, "values", values)
        if self.n_rows < 1 or self.n_cols < 1 or self.k < 1:
            raise ValueError("n_rows, n_cols and k must be positive")
        if offsets.shape != (self.n_rows + 1,):
            raise ValueError("row_offsets must have n_rows + 1 entries")
        if offsets[0] != 0 or np.any(np.diff(offsets.astype(np.int64)) < 0):
            raise ValueError("row_offsets must start at 0 and be monotone")
        nnz = int(offsets[-1])
        if cols.shape != (nnz,) or values.shape != (nnz,):
            raise ValueError("col_ids/values length must match row_offsets[-1]")
        counts = np.diff(offsets.astype(np.int64))
        if np.any(counts > self.k):
            raise ValueError("a row holds more than k entries")
        if nnz and int(cols.max()) >= self.n_cols:
            raise ValueError("column index out of range")
        if np.any(values < -1.0) or np.any(values > 1.0):
            raise ValueError("values outside [-1, 1]")
        if nnz:
            row_of = np.repeat(np.arange(self.n_rows, dtype=np.int64), counts)
            keys = row_of * self.n_cols + cols.astype(np.int64)
            if np.unique(keys).size != nnz:
                raise ValueError("duplicate column within a row")
        # descending value within rows, ties by ascending column
        if nnz > 1:
            same_row = np.ones(nnz - 1, dtype=bool)
            # a row boundary at offset o separates entries o-1 and o
            boundaries = offsets[1:-1].astype(np.int64) - 1
            boundaries = boundaries[(boundaries >= 0) & (boundaries < nnz - 1)]
            same_row[boundaries] = False
            v0, v1 = values[:-1], values[1:]
            c0, c1 = cols[:-1], cols[1:]
            ok = (v0 > v1) | ((v0 == v1) & (c0 < c1))
            if not np.all(ok | ~same_row):
                raise ValueError("row entries not sorted by (-value, column)")
        if self.row_pair_ids is not None and len(self.row_pair_ids) != self.n_rows:
            raise ValueError("row_pair_ids length must equal n_rows")
        if self.col_pair_ids is not None and len(self.col_pair_ids) != self.n_cols:
            raise ValueError("col_pair_ids length must equal n_cols")

    @property
    def nnz(self) -> int:
        return int(self.row_offsets[-1])

    def row_entries(self, row: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = int(self.row_offsets[row]), int(self.row_offsets[row + 1])
        return self.col_ids[lo:hi], self.values[lo:hi]


@dataclass(frozen=True)
class Assignment:
    """Injective row-to-column mapping with the total of the selected values."""

    mapping: dict[int, int]
    total: float
    unmatched_rows: tuple[int, ...] = ()


def _sequential_sum(values: Sequence[float]) -> float:
    total = 0.0
    for v in values:
        total += float(v)
    return total


def _select_row_topk(row: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Top-k entries of one float32 row, boundary ties going to smaller columns."""
    n_cols = row.shape[0]
    if k >= n_cols:
        cols = np.arange(n_cols, dtype=np.int64)
        vals = row
    else:
        part = np.argpartition(row, n_cols - k)[n_cols - k:]
        threshold = row[part].min()
        greater = np.flatnonzero(row > threshold)
        need = k - greater.size
        at_threshold = np.flatnonzero(row == threshold)[:need]
        cols = np.concatenate([greater, at_threshold])
        vals = row[cols]
    order = np.lexsort((cols, -vals))
    return cols[order].astype(np.uint64), vals[order]


def build_topk(anchors: EmbeddingSet, candidates: EmbeddingSet, k: int) -> SparseTopKMatrix:
    """Per anchor, keep the k largest cosines against all candidates.

    Both sets must be normalized and share a dimension. Similarities are
    accumulated in float64, clamped to [-1, 1] and stored as float32.
    """
    if k < 1:
        raise ValueError("k must be positive")
    if not anchors.normalized or not candidates.normalized:
        raise NotNormalized("build_topk requires normalized embedding sets")
    if anchors.dim != candidates.dim:
        raise DimensionMismatch(
            f"anchor dim {anchors.dim} != candidate dim {candidates.dim}"
        )
    n_rows, n_cols = len(anchors), len(candidates)
    if n_rows == 0 or n_cols == 0:
        raise EmptyMatrix("both embedding sets must be non-empty")
    cand_t = candidates.vectors.astype(np.float64).T
    chunk_rows = max(1, _CHUNK_ELEMENTS // n_cols)
    per_row = min(k, n_cols)

    offsets = np.zeros(n_rows + 1, dtype=np.uint64)
    col_parts: list[np.ndarray] = []
    val_parts: list[np.ndarray] = []
    for start in range(0, n_rows, chunk_rows):
        block = anchors.vectors[start : start + chunk_rows].astype(np.float64)
        sims = block @ cand_t
        np.clip(sims, -1.0, 1.0, out=sims)
        sims32 = sims.astype(np.float32)
        for i in range(sims32.shape[0]):
            cols, vals = _select_row_topk(sims32[i], k)
            col_parts.append(cols)
            val_parts.append(vals)
            offsets[start + i + 1] = offsets[start + i] + np.uint64(len(cols))
    return SparseTopKMatrix(
        n_rows=n_rows,
        n_cols=n_cols,
        k=k,
        row_offsets=offsets,
        col_ids=np.concatenate(col_parts) if col_parts else np.zeros(0, np.uint64),
        values=np.concatenate(val_parts) if val_parts else np.zeros(0, np.float32),
        row_pair_ids=anchors.ids,
        col_pair_ids=candidates.ids,
    )


def save_matrix(matrix: SparseTopKMatrix, path: str | Path) -> None:
    if matrix.row_pair_ids is None or matrix.col_pair_ids is None:
        raise ValueError("matrix needs row/col pair ids to be saved")
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<QQI", matrix.n_rows, matrix.n_cols, matrix.k))
        fh.write(np.ascontiguousarray(matrix.row_offsets, dtype="<u8").tobytes())
        fh.write(np.ascontiguousarray(matrix.col_ids, dtype="<u8").tobytes())
        fh.write(np.ascontiguousarray(matrix.values, dtype="<f4").tobytes())
        write_id_table(fh, matrix.row_pair_ids)
        write_id_table(fh, matrix.col_pair_ids)


def load_matrix(path: str | Path) -> SparseTopKMatrix:
    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise BadMagic(f"{path}: expected magic {MAGIC!r}, got {magic!r}")
        n_rows, n_cols, k = struct.unpack("<QQI", read_exact(fh, 20, "header"))
        offsets = np.frombuffer(
            read_exact(fh, (n_rows + 1) * 8, "row_offsets"), dtype="<u8"
        )
        nnz = int(offsets[-1])
        cols = np.frombuffer(read_exact(fh, nnz * 8, "col_ids"), dtype="<u8")
        values = np.frombuffer(read_exact(fh, nnz * 4, "values"), dtype="<f4")
        row_ids = read_id_table(fh, n_rows, "row")
        col_ids = read_id_table(fh, n_cols, "col")
        expect_eof(fh, "STK1")
    return SparseTopKMatrix(
        n_rows=int(n_rows),
        n_cols=int(n_cols),
        k=int(k),
        row_offsets=offsets,
        col_ids=cols,
        values=values,
        row_pair_ids=row_ids,
        col_pair_ids=col_ids,
    )


def _shortest_augmenting_paths(
    matrix: SparseTopKMatrix, use_dummies: bool
) -> np.ndarray:
    """Min-cost row-perfect matching on costs 1 - value, one private dummy
    column per row when use_dummies is set. Returns match_row (dummy columns
    appear as indices >= n_cols); raises NoPerfectMatching otherwise."""
    n_rows, n_cols = matrix.n_rows, matrix.n_cols
    offsets = matrix.row_offsets.astype(np.int64)
    cols = matrix.col_ids.astype(np.int64)
    costs = 1.0 - matrix.values.astype(np.float64)
    # One dummy beats any rearrangement of real edges, so dummies are used
    # only when a row cannot be matched at all: cardinality dominates total.
    dummy_cost = 2.0 * n_rows + 4.0
    n_total = n_cols + (n_rows if use_dummies else 0)

    u = np.zeros(n_rows, dtype=np.float64)
    v = np.zeros(n_total, dtype=np.float64)
    match_row = np.full(n_rows, -1, dtype=np.int64)
    match_col = np.full(n_total, -1, dtype=np.int64)

    dist = np.empty(n_total, dtype=np.float64)
    prev_col = np.empty(n_total, dtype=np.int64)
    done = np.empty(n_total, dtype=bool)

    for r0 in range(n_rows):
        dist.fill(np.inf)
        prev_col.fill(-1)
        done.fill(False)
        heap: list[tuple[float, int]] = []

        def relax(row: int, base: float, from_col: int) -> None:
            lo, hi = offsets[row], offsets[row + 1]
            row_cols = cols[lo:hi]
            nd = base + costs[lo:hi] - u[row] - v[row_cols]
            better = nd < dist[row_cols]
            if better.any():
                for c, d in zip(row_cols[better].tolist(), nd[better].tolist()):
                    if not done[c]:
                        dist[c] = d
                        prev_col[c] = from_col
                        heappush(heap, (d, c))
            if use_dummies:
                c = n_cols + row
                d = base + dummy_cost - u[row] - v[c]
                if not done[c] and d < dist[c]:
                    dist[c] = d
                    prev_col[c] = from_col
                    heappush(heap, (d, c))

        relax(r0, 0.0, -1)
        found = -1
        delta = 0.0
        finalized: list[int] = []
        while heap:
            d, j = heappop(heap)
            if done[j] or d > dist[j]:
                continue
            if match_col[j] < 0:
                found = j
                delta = d
                break
            done[j] = True
            finalized.append(j)
            relax(int(match_col[j]), d, j)
        if found < 0:
            witness = sorted({r0} | {int(match_col[j]) for j in finalized})
            raise NoPerfectMatching(tuple(witness))
        for j in finalized:
            v[j] += dist[j] - delta
            u[match_col[j]] += delta - dist[j]
        u[r0] += delta
        j = found
        while True:
            pj = int(prev_col[j])
            if pj < 0:
                match_col[j] = r0
                match_row[r0] = j
                break
            r = int(match_col[pj])
            match_col[j] = r
            match_row[r] = j
            j = pj
    return match_row


def _value_at(matrix: SparseTopKMatrix, row: int, col: int) -> float:
    row_cols, row_vals = matrix.row_entries(row)
    hits = np.flatnonzero(row_cols == np.uint64(col))
    if hits.size == 0:
        raise UnknownColumn(col)
    return float(row_vals[int(hits[0])])


def solve_sparse_assignment(
    matrix: SparseTopKMatrix, allow_unmatched: bool = False
) -> Assignment:
    """Maximum-total injective assignment over the stored entries.

    With allow_unmatched=False the absence of a row-perfect matching raises
    NoPerfectMatching carrying a witness row set. With allow_unmatched=True
    the result is a maximum-cardinality, then maximum-total assignment and
    the unmatched rows are reported.
    """
    if matrix.nnz == 0:
        raise EmptyMatrix("matrix holds no entries")
    if matrix.n_rows > matrix.n_cols:
        raise DimensionMismatch(
            f"n_rows {matrix.n_rows} exceeds n_cols {matrix.n_cols}"
        )
    match_row = _shortest_augmenting_paths(matrix, use_dummies=allow_unmatched)
    mapping: dict[int, int] = {}
    unmatched: list[int] = []
    selected_values: list[float] = []
    for r in range(matrix.n_rows):
        c = int(match_row[r])
        if c >= matrix.n_cols:
            unmatched.append(r)
            continue
        mapping[r] = c
        selected_values.append(_value_at(matrix, r, c))
    return Assignment(
        mapping=mapping,
        total=_sequential_sum(selected_values),
        unmatched_rows=tuple(unmatched),
    )


_PERM_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _permutations(n_rows: int, n_cols: int) -> np.ndarray:
    key = (n_rows, n_cols)
    if key not in _PERM_CACHE:
        perms = np.array(
            list(itertools.permutations(range(n_cols), n_rows)), dtype=np.int64
        )
        _PERM_CACHE[key] = perms
    return _PERM_CACHE[key]


def dense_oracle(values: np.ndarray) -> Assignment:
    """Exhaustive maximum-total assignment for matrices up to 9 columns."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError("values must be a 2-D matrix")
    n_rows, n_cols = values.shape
    if n_rows > n_cols:
        raise DimensionMismatch(f"n_rows {n_rows} exceeds n_cols {n_cols}")
    if n_cols > 9:
        raise TooLarge(f"oracle limited to 9 columns, got {n_cols}")
    if n_rows == 0:
        raise EmptyMatrix("oracle needs at least one row")
    perms = _permutations(n_rows, n_cols)
    totals = values[np.arange(n_rows), perms].sum(axis=1)
    best = perms[int(np.argmax(totals))]
    mapping = {r: int(best[r]) for r in range(n_rows)}
    total = _sequential_sum([values[r, mapping[r]] for r in range(n_rows)])
    return Assignment(mapping=mapping, total=total)


def select_matched_subset(
    manifest: Manifest,
    assignment: Assignment,
    column_index_to_pair_id: Mapping[int, str] | Sequence[str],
) -> Manifest:
    """Candidate records picked by the assignment, sorted by pair_id."""
    by_id = {rec.pair_id: rec for rec in manifest}

    def resolve(col: int) -> str:
        if isinstance(column_index_to_pair_id, Mapping):
            if col not in column_index_to_pair_id:
                raise UnknownColumn(col)
            return column_index_to_pair_id[col]
        if not 0 <= col < len(column_index_to_pair_id):
            raise UnknownColumn(col)
        return column_index_to_pair_id[col]

    selected = []
    for _, col in sorted(assignment.mapping.items()):
        pair_id = resolve(col)
        if pair_id not in by_id:
            raise UnknownColumn(pair_id)
        selected.append(by_id[pair_id])
    selected.sort(key=lambda r: r.pair_id)
    return Manifest(
        tuple(selected),
        provenance=f"{manifest.provenance} | select_matched({len(selected)} rows)",
    )
