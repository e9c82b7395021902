import numpy as np

from pairkit.matching import SparseTopKMatrix


def sparse_from_dense(values, mask=None, k=None):
    """Build a SparseTopKMatrix holding the masked entries of a dense matrix."""
    values = np.asarray(values, dtype=np.float64)
    n_rows, n_cols = values.shape
    if mask is None:
        mask = np.ones_like(values, dtype=bool)
    offsets = [0]
    cols: list[int] = []
    vals: list[float] = []
    for i in range(n_rows):
        entries = [
            (np.float32(values[i, j]), j) for j in range(n_cols) if mask[i, j]
        ]
        entries.sort(key=lambda t: (-t[0], t[1]))
        cols.extend(c for _, c in entries)
        vals.extend(v for v, _ in entries)
        offsets.append(len(cols))
    return SparseTopKMatrix(
        n_rows=n_rows,
        n_cols=n_cols,
        k=k or n_cols,
        row_offsets=np.array(offsets, dtype=np.uint64),
        col_ids=np.array(cols, dtype=np.uint64),
        values=np.array(vals, dtype=np.float32),
    )


def random_instance(rng, max_rows=8, max_cols=9, integer_valued=False, sparsify=True):
    """Random (dense values, mask) with a guaranteed perfect matching."""
    n_rows = rng.integers(1, max_rows + 1)
    n_cols = rng.integers(n_rows, max_cols + 1)
    if integer_valued:
        values = rng.integers(-8, 9, size=(n_rows, n_cols)).astype(np.float64) / 8.0
    else:
        values = rng.uniform(-1, 1, size=(n_rows, n_cols))
    values = values.astype(np.float32).astype(np.float64)
    if sparsify:
        mask = rng.uniform(size=values.shape) < 0.6
        perm = rng.permutation(n_cols)[:n_rows]
        mask[np.arange(n_rows), perm] = True
    else:
        mask = np.ones_like(values, dtype=bool)
    return values, mask
