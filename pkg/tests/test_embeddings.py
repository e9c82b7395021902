import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pairkit.embeddings import (
    EmbeddingSet,
    cosine,
    load_embeddings,
    normalize,
    save_embeddings,
)
from pairkit.errors import (
    BadMagic,
    DuplicateId,
    NotNormalized,
    TruncatedFile,
    UnknownId,
    ZeroVector,
)


def make_set(vectors, ids=None, normalized=False):
    vectors = np.asarray(vectors, dtype=np.float32)
    ids = tuple(ids or (f"v{i}" for i in range(vectors.shape[0])))
    return EmbeddingSet(ids=ids, vectors=vectors, normalized=normalized)


class TestFileFormat:
    def test_round_trip_two_vectors(self, tmp_path):
        original = make_set([[1, 2, 3, 4], [5, 6, 7, 8]])
        path = tmp_path / "e.emb"
        save_embeddings(original, path)
        loaded = load_embeddings(path)
        assert loaded.ids == original.ids
        assert loaded.dim == 4
        assert loaded.vectors.tobytes() == original.vectors.tobytes()
        assert loaded.normalized is False

    def test_round_trip_bit_exact_non_ascii(self, tmp_path):
        rng = np.random.default_rng(3)
        original = normalize(
            make_set(rng.standard_normal((17, 9)), ids=[f"véc·{i}↯" for i in range(17)])
        )
        path = tmp_path / "e.emb"
        save_embeddings(original, path)
        loaded = load_embeddings(path)
        assert loaded.ids == original.ids
        assert loaded.normalized is True
        assert loaded.vectors.tobytes() == original.vectors.tobytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "e.emb"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(BadMagic):
            load_embeddings(path)

    def test_truncated_payload(self, tmp_path):
        original = make_set([[1, 2], [3, 4]])
        path = tmp_path / "e.emb"
        save_embeddings(original, path)
        data = path.read_bytes()
        path.write_bytes(data[:-3])
        with pytest.raises(TruncatedFile):
            load_embeddings(path)

    def test_trailing_garbage(self, tmp_path):
        original = make_set([[1, 2]])
        path = tmp_path / "e.emb"
        save_embeddings(original, path)
        path.write_bytes(path.read_bytes() + b"x")
        with pytest.raises(TruncatedFile):
            load_embeddings(path)

    def test_duplicate_id_in_file(self, tmp_path):
        path = tmp_path / "e.emb"
        payload = np.zeros(4, dtype="<f4").tobytes()
        ident = "same".encode()
        with path.open("wb") as fh:
            fh.write(b"EMB1")
            fh.write(struct.pack("<IQB", 2, 2, 0))
            for _ in range(2):
                fh.write(struct.pack("<H", len(ident)))
                fh.write(ident)
            fh.write(payload)
        with pytest.raises(DuplicateId):
            load_embeddings(path)

    def test_lying_normalized_flag_rejected(self, tmp_path):
        path = tmp_path / "e.emb"
        vec = np.array([[3.0, 4.0]], dtype="<f4")
        with path.open("wb") as fh:
            fh.write(b"EMB1")
            fh.write(struct.pack("<IQB", 2, 1, 1))
            fh.write(struct.pack("<H", 1) + b"a")
            fh.write(vec.tobytes())
        with pytest.raises(NotNormalized):
            load_embeddings(path)


class TestNormalize:
    def test_three_four_five(self):
        result = normalize(make_set([[3.0, 4.0]]))
        assert result.normalized
        np.testing.assert_allclose(result.vectors[0], [0.6, 0.8], rtol=1e-7)

    def test_idempotent_within_tolerance(self):
        rng = np.random.default_rng(0)
        once = normalize(make_set(rng.standard_normal((50, 8))))
        twice = normalize(once)
        assert np.abs(twice.vectors - once.vectors).max() < 1e-7

    def test_zero_vector(self):
        with pytest.raises(ZeroVector) as excinfo:
            normalize(make_set([[1.0, 1.0], [0.0, 0.0]], ids=["ok", "bad"]))
        assert excinfo.value.vec_id == "bad"

    def test_preserves_ids_and_order(self):
        result = normalize(make_set([[2, 0], [0, 5]], ids=["b", "a"]))
        assert result.ids == ("b", "a")


class TestCosine:
    def test_self_similarity(self):
        e = normalize(make_set([[1.0, 2.0, 2.0]], ids=["x"]))
        assert cosine(e, "x", "x") == 1.0

    def test_orthogonal(self):
        e = make_set([[1.0, 0.0], [0.0, 1.0]], ids=["a", "b"], normalized=True)
        assert cosine(e, "a", "b") == 0.0

    def test_hand_dot_product(self):
        e = make_set([[0.6, 0.8], [0.8, 0.6]], ids=["a", "b"], normalized=True)
        assert abs(cosine(e, "a", "b") - 0.96) < 1e-6

    def test_symmetry_exact(self):
        rng = np.random.default_rng(1)
        e = normalize(make_set(rng.standard_normal((10, 16))))
        for a, b in [("v0", "v9"), ("v3", "v4"), ("v7", "v2")]:
            assert cosine(e, a, b) == cosine(e, b, a)

    def test_requires_normalized(self):
        e = make_set([[1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(NotNormalized):
            cosine(e, "v0", "v1")

    def test_unknown_id(self):
        e = make_set([[1.0, 0.0]], normalized=True)
        with pytest.raises(UnknownId):
            cosine(e, "v0", "missing")

    def test_always_in_range(self):
        rng = np.random.default_rng(2)
        e = normalize(make_set(rng.standard_normal((40, 3))))
        values = [cosine(e, f"v{i}", f"v{j}") for i in range(40) for j in range(40)]
        assert all(-1.0 <= v <= 1.0 for v in values)


class TestConstruction:
    def test_duplicate_ids_rejected(self):
        with pytest.raises(DuplicateId):
            make_set([[1, 0], [0, 1]], ids=["a", "a"])

    def test_normalized_flag_validated(self):
        with pytest.raises(NotNormalized):
            make_set([[3.0, 4.0]], normalized=True)

    def test_subset_orders_rows(self):
        e = make_set([[1, 0], [0, 1], [1, 1]], ids=["a", "b", "c"])
        sub = e.subset(("c", "a"))
        assert sub.ids == ("c", "a")
        np.testing.assert_array_equal(sub.vectors, [[1, 1], [1, 0]])


@settings(max_examples=30, deadline=None)
@given(
    data=st.data(),
    count=st.integers(min_value=1, max_value=12),
    dim=st.integers(min_value=1, max_value=16),
)
def test_store_load_bit_exact_property(tmp_path_factory, data, count, dim):
    raw = data.draw(
        st.lists(
            st.floats(width=32, allow_nan=False, allow_infinity=False),
            min_size=count * dim,
            max_size=count * dim,
        )
    )
    vectors = np.array(raw, dtype=np.float32).reshape(count, dim)
    original = EmbeddingSet(
        ids=tuple(f"id{i}" for i in range(count)), vectors=vectors, normalized=False
    )
    path = tmp_path_factory.mktemp("emb") / "p.emb"
    save_embeddings(original, path)
    loaded = load_embeddings(path)
    assert loaded.vectors.tobytes() == original.vectors.tobytes()
    assert loaded.ids == original.ids
