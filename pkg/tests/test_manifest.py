import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pairkit.errors import DuplicatePairId, IoFailure, MalformedLine
from pairkit.manifest import (
    CompositionArm,
    CompositionSpec,
    Manifest,
    PairRecord,
    compose_datasets,
    read_manifest,
    write_manifest,
)


def rec(pair_id, caption="a ball", source="saycam", similarity=None, image_ref=None):
    return PairRecord(
        pair_id=pair_id,
        image_ref=image_ref or f"img/{pair_id}.jpg",
        caption=caption,
        source=source,
        similarity=similarity,
    )


def write_lines(path, lines):
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


class TestReadManifest:
    def test_three_valid_lines(self, tmp_path):
        path = tmp_path / "m.jsonl"
        write_lines(
            path,
            [
                json.dumps({"pair_id": f"p{i}", "image_ref": "x", "caption": "hi", "source": "saycam"})
                for i in range(3)
            ],
        )
        manifest = read_manifest(path)
        assert len(manifest) == 3
        assert [r.pair_id for r in manifest] == ["p0", "p1", "p2"]

    def test_duplicate_pair_id(self, tmp_path):
        path = tmp_path / "m.jsonl"
        line = json.dumps({"pair_id": "a", "image_ref": "x", "caption": "hi", "source": "saycam"})
        write_lines(path, [line, line])
        with pytest.raises(DuplicatePairId) as excinfo:
            read_manifest(path)
        assert excinfo.value.pair_id == "a"

    def test_empty_file(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text("", encoding="utf-8")
        assert len(read_manifest(path)) == 0

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoFailure):
            read_manifest(tmp_path / "absent.jsonl")

    @pytest.mark.parametrize(
        "obj, fragment",
        [
            ({"pair_id": "a", "image_ref": "x", "caption": "hi", "source": "saycam", "extra": 1}, "unknown"),
            ({"pair_id": "a", "image_ref": "x", "source": "saycam"}, "missing"),
            ({"pair_id": "a", "image_ref": "x", "caption": "", "source": "saycam"}, "caption"),
            ({"pair_id": "a", "image_ref": "x", "caption": "hi", "source": "webscrape"}, "source"),
            ({"pair_id": "a", "image_ref": "x", "caption": "hi", "source": "saycam", "similarity": 1.5}, "similarity"),
            ({"pair_id": "a", "image_ref": "x", "caption": "hi", "source": "saycam", "similarity": True}, "similarity"),
        ],
    )
    def test_invalid_records(self, tmp_path, obj, fragment):
        path = tmp_path / "m.jsonl"
        write_lines(path, [json.dumps(obj)])
        with pytest.raises(MalformedLine) as excinfo:
            read_manifest(path)
        assert excinfo.value.line_no == 1
        assert fragment in str(excinfo.value).lower()

    def test_invalid_json_reports_line_number(self, tmp_path):
        path = tmp_path / "m.jsonl"
        good = json.dumps({"pair_id": "a", "image_ref": "x", "caption": "hi", "source": "saycam"})
        write_lines(path, [good, "{nope"])
        with pytest.raises(MalformedLine) as excinfo:
            read_manifest(path)
        assert excinfo.value.line_no == 2


class TestWriteManifest:
    def test_round_trip_single(self, tmp_path):
        manifest = Manifest((rec("a", similarity=0.25),))
        path = tmp_path / "m.jsonl"
        write_manifest(manifest, path)
        back = read_manifest(path)
        assert back.records == manifest.records

    def test_round_trip_10k_preserves_order(self, tmp_path):
        records = tuple(rec(f"p{i:05d}", similarity=(i % 200 - 100) / 100) for i in range(10_000))
        manifest = Manifest(records)
        path = tmp_path / "big.jsonl"
        write_manifest(manifest, path)
        assert read_manifest(path).records == records

    def test_unwritable_path(self, tmp_path):
        with pytest.raises(IoFailure):
            write_manifest(Manifest((rec("a"),)), tmp_path / "no-such-dir" / "m.jsonl")

    def test_lf_endings_and_utf8(self, tmp_path):
        manifest = Manifest((rec("a", caption="¡mira, una pelota! 🎈"),))
        path = tmp_path / "m.jsonl"
        write_manifest(manifest, path)
        raw = path.read_bytes()
        assert b"\r" not in raw
        assert "pelota" in raw.decode("utf-8")
        assert read_manifest(path).records == manifest.records


_text = st.text(
    st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=30
)


@settings(max_examples=50, deadline=None)
@given(
    sims=st.lists(
        st.one_of(st.none(), st.floats(min_value=-1, max_value=1, allow_nan=False)),
        min_size=1,
        max_size=8,
    ),
    captions=st.lists(_text, min_size=8, max_size=8),
)
def test_round_trip_property(tmp_path_factory, sims, captions):
    records = tuple(
        rec(f"id{i:02d}", caption=captions[i % len(captions)], similarity=sim)
        for i, sim in enumerate(sims)
    )
    path = tmp_path_factory.mktemp("rt") / "m.jsonl"
    write_manifest(Manifest(records), path)
    assert read_manifest(path).records == records


class TestCompose:
    def _arm_file(self, tmp_path, name, ids):
        path = tmp_path / name
        write_manifest(Manifest(tuple(rec(i) for i in ids)), path)
        return path

    def test_full_union(self, tmp_path):
        a = self._arm_file(tmp_path, "a.jsonl", ["a1", "a2"])
        b = self._arm_file(tmp_path, "b.jsonl", ["b1", "b2", "b3"])
        spec = CompositionSpec(
            arms=(CompositionArm(a, 1.0, 0), CompositionArm(b, 1.0, 0))
        )
        out = compose_datasets(spec)
        assert [r.pair_id for r in out] == ["a1", "a2", "b1", "b2", "b3"]

    def test_half_fraction_deterministic(self, tmp_path):
        a = self._arm_file(tmp_path, "a.jsonl", ["p1", "p2", "p3", "p4"])
        spec = CompositionSpec(arms=(CompositionArm(a, 0.5, 7),))
        first = compose_datasets(spec)
        second = compose_datasets(spec)
        assert len(first) == 2
        assert first.records == second.records

    def test_different_seeds_can_differ(self, tmp_path):
        ids = [f"p{i:03d}" for i in range(64)]
        a = self._arm_file(tmp_path, "a.jsonl", ids)
        picks = {
            tuple(r.pair_id for r in compose_datasets(
                CompositionSpec(arms=(CompositionArm(a, 0.25, seed),))
            ))
            for seed in range(8)
        }
        assert len(picks) > 1

    def test_collision_across_arms(self, tmp_path):
        a = self._arm_file(tmp_path, "a.jsonl", ["x", "a2"])
        b = self._arm_file(tmp_path, "b.jsonl", ["b1", "x"])
        spec = CompositionSpec(
            arms=(CompositionArm(a, 1.0, 0), CompositionArm(b, 1.0, 0))
        )
        with pytest.raises(DuplicatePairId) as excinfo:
            compose_datasets(spec)
        assert excinfo.value.pair_id == "x"

    def test_cardinality_law_and_sorted_output(self, tmp_path):
        sizes = (13, 29, 7)
        arms = []
        for n, size in enumerate(sizes):
            ids = [f"arm{n}_{i:03d}" for i in range(size)]
            arms.append(CompositionArm(self._arm_file(tmp_path, f"{n}.jsonl", ids), 0.4, n))
        out = compose_datasets(CompositionSpec(arms=tuple(arms)))
        assert len(out) == sum(math.floor(0.4 * size) for size in sizes)
        ids = [r.pair_id for r in out]
        assert ids == sorted(ids)

    @pytest.mark.parametrize("fraction", [0.0, -0.1, 1.01])
    def test_fraction_validation(self, tmp_path, fraction):
        with pytest.raises(ValueError):
            CompositionArm(tmp_path / "a.jsonl", fraction, 0)
