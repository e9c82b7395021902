import json
import math

import numpy as np
import pytest

from pairkit.embeddings import EmbeddingSet
from pairkit.errors import EmptyInput, MalformedLine, NothingScored, UnknownId
from pairkit.scoring import (
    CaptionSample,
    FourAFCSample,
    TwoAFCSample,
    WinoQuad,
    build_report,
    cosine_score_samples,
    load_four_afc,
    load_two_afc,
    load_winoground,
    report_to_dict,
    score_four_afc,
    score_two_afc,
    score_winoground,
    write_report,
    read_report,
)

DIFFS = ("verb", "adjective", "noun", "verb_noun", "adjective_noun", "verb_adjective")


def four(scores, correct, sid="s"):
    return FourAFCSample(
        sample_id=sid, label="ball", candidate_scores=tuple(scores), correct_index=correct
    )


def two(pos, neg, diff="verb", sid="s"):
    return TwoAFCSample(sample_id=sid, pos_score=pos, neg_score=neg, diff_type=diff)


def quad(s_pp, s_pn, s_np, s_nn, sid="q"):
    return WinoQuad(sample_id=sid, s_pp=s_pp, s_pn=s_pn, s_np=s_np, s_nn=s_nn)


class TestFourAFC:
    def test_unique_max_hit(self):
        assert score_four_afc([four((0.1, 0.7, 0.05, 0.15), 1)]) == 1.0

    def test_tie_counts_as_miss(self):
        assert score_four_afc([four((0.5, 0.5, 0.2, 0.1), 0)]) == 0.0

    def test_wrong_max_is_miss(self):
        assert score_four_afc([four((0.9, 0.1, 0.2, 0.3), 2)]) == 0.0

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            score_four_afc([])

    def test_validation(self):
        with pytest.raises(ValueError):
            four((0.1, 0.2, 0.3), 0)
        with pytest.raises(ValueError):
            four((0.1, 0.2, 0.3, 0.4), 4)


class TestTwoAFC:
    def test_hit_miss_tie(self):
        accuracy, _ = score_two_afc([two(0.8, 0.3), two(0.3, 0.3), two(0.1, 0.9)])
        assert accuracy == pytest.approx(1 / 3)

    def test_by_type_breakdown_and_absent_types(self):
        samples = [
            two(1.0, 0.0, "verb"),
            two(0.0, 1.0, "verb"),
            two(1.0, 0.0, "noun"),
        ]
        accuracy, by_type = score_two_afc(samples)
        assert accuracy == pytest.approx(2 / 3)
        assert by_type == {"verb": 0.5, "noun": 1.0}
        assert "adjective" not in by_type

    def test_weighted_recomposition_exact(self):
        rng = np.random.default_rng(0)
        samples = [
            two(float(rng.uniform()), float(rng.uniform()), DIFFS[int(rng.integers(6))], sid=f"s{i}")
            for i in range(997)
        ]
        accuracy, by_type = score_two_afc(samples)
        counts = {d: sum(1 for s in samples if s.diff_type == d) for d in DIFFS}
        recomposed = sum(by_type[d] * counts[d] for d in by_type) / len(samples)
        assert recomposed == pytest.approx(accuracy, abs=1e-12)

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            score_two_afc([])


class TestWinoground:
    def test_all_four_comparisons_hold(self):
        scores = score_winoground([quad(0.9, 0.1, 0.2, 0.8)])
        assert scores.positive_context == 1.0
        assert scores.negative_context == 1.0
        assert scores.overall == 1.0

    def test_partial_example(self):
        scores = score_winoground([quad(0.5, 0.6, 0.2, 0.7)])
        assert scores.positive_context == 0.0
        assert scores.negative_context == 1.0
        assert scores.overall == 0.0

    def test_ties_fail(self):
        scores = score_winoground([quad(0.5, 0.5, 0.2, 0.8)])
        assert scores.positive_context == 0.0
        assert scores.overall == 0.0

    def test_decomposition_bound(self):
        rng = np.random.default_rng(1)
        quads = [
            quad(*rng.uniform(size=4), sid=f"q{i}")
            for i in range(2000)
        ]
        scores = score_winoground(quads)
        assert scores.overall <= min(scores.positive_context, scores.negative_context)

    def test_overall_is_conjunction(self):
        rng = np.random.default_rng(2)
        for i in range(500):
            q = quad(*rng.uniform(size=4), sid=f"q{i}")
            single = score_winoground([q])
            assert single.overall == single.positive_context * single.negative_context

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            quad(float("nan"), 0.1, 0.2, 0.3)

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            score_winoground([])


class TestScaleInvariance:
    def test_monotone_transform_preserves_scores(self):
        rng = np.random.default_rng(3)

        def transform(x):
            return math.exp(2.0 * x) + 1.0

        fours = [four(tuple(rng.uniform(size=4)), int(rng.integers(4)), sid=f"f{i}") for i in range(200)]
        fours_t = [
            four(tuple(transform(v) for v in s.candidate_scores), s.correct_index, sid=s.sample_id)
            for s in fours
        ]
        assert score_four_afc(fours) == score_four_afc(fours_t)

        twos = [two(float(rng.uniform()), float(rng.uniform()), DIFFS[i % 6], sid=f"t{i}") for i in range(200)]
        twos_t = [
            two(transform(s.pos_score), transform(s.neg_score), s.diff_type, sid=s.sample_id)
            for s in twos
        ]
        assert score_two_afc(twos) == score_two_afc(twos_t)

        quads = [quad(*rng.uniform(size=4), sid=f"q{i}") for i in range(200)]
        quads_t = [
            quad(transform(q.s_pp), transform(q.s_pn), transform(q.s_np), transform(q.s_nn), sid=q.sample_id)
            for q in quads
        ]
        assert score_winoground(quads) == score_winoground(quads_t)


class TestCosineScoreSamples:
    def _sets(self):
        images = EmbeddingSet(
            ids=("i0", "i1"),
            vectors=np.array([[1.0, 0.0], [0.0, 1.0]], np.float32),
            normalized=True,
        )
        texts = EmbeddingSet(
            ids=("t0", "t1"),
            vectors=np.array([[1.0, 0.0], [0.0, 1.0]], np.float32),
            normalized=True,
        )
        return images, texts

    def test_identical_and_orthogonal(self):
        images, texts = self._sets()
        assert cosine_score_samples([("i0", "t0")], images, texts) == [1.0]
        assert cosine_score_samples([("i0", "t1")], images, texts) == [0.0]

    def test_quad_slots_match_individual_cosines(self):
        images, texts = self._sets()
        slots = cosine_score_samples(
            [("i0", "t0"), ("i0", "t1"), ("i1", "t0"), ("i1", "t1")], images, texts
        )
        assert slots == [1.0, 0.0, 0.0, 1.0]

    def test_unknown_id(self):
        images, texts = self._sets()
        with pytest.raises(UnknownId):
            cosine_score_samples([("i0", "missing")], images, texts)


class TestReport:
    def test_only_vtwt_scored(self):
        report = build_report(two_afc=[two(0.9, 0.1)])
        assert report.vtwt_accuracy == 1.0
        assert report.labeled_s_accuracy is None
        doc = report_to_dict(report)
        assert "labeled_s_accuracy" not in doc
        assert "winoground" not in doc
        assert doc["counts"] == {"vtwt": 1, "vtwt_by_type": {"verb": 1}}

    def test_all_tasks_present(self):
        report = build_report(
            four_afc=[four((0.9, 0.1, 0.1, 0.1), 0)],
            two_afc=[two(0.9, 0.1)],
            winoground=[quad(0.9, 0.1, 0.2, 0.8)],
            captions=[CaptionSample("c0", "the ball", "the ball")],
        )
        doc = report_to_dict(report)
        for key in (
            "labeled_s_accuracy",
            "vtwt_accuracy",
            "vtwt_by_type",
            "winoground",
            "caption_meteor_mean",
        ):
            assert key in doc
        assert doc["winoground"].keys() == {"overall", "positive_context", "negative_context"}

    def test_nothing_scored(self):
        with pytest.raises(NothingScored):
            build_report()

    def test_four_decimal_serialization(self, tmp_path):
        report = build_report(two_afc=[two(1.0, 0.0, "verb"), two(1.0, 0.0, "noun"), two(0.0, 1.0, "noun")])
        doc = report_to_dict(report)
        assert doc["vtwt_accuracy"] == 0.6667
        path = tmp_path / "r.json"
        write_report(report, path)
        assert read_report(path) == doc


class TestTaskLoaders:
    def _embeddings(self):
        vectors = np.eye(4, dtype=np.float32)
        images = EmbeddingSet(ids=("i0", "i1", "i2", "i3"), vectors=vectors, normalized=True)
        texts = EmbeddingSet(ids=("t0", "t1", "t2", "t3"), vectors=vectors, normalized=True)
        return images, texts

    def test_four_afc_with_scores(self, tmp_path):
        path = tmp_path / "t.jsonl"
        path.write_text(
            json.dumps(
                {
                    "sample_id": "s0",
                    "label": "ball",
                    "candidate_scores": [0.1, 0.9, 0.2, 0.3],
                    "correct_index": 1,
                }
            )
            + "\n",
            encoding="utf-8",
        )
        samples = load_four_afc(path)
        assert score_four_afc(samples) == 1.0

    def test_four_afc_with_embedding_slots(self, tmp_path):
        images, texts = self._embeddings()
        path = tmp_path / "t.jsonl"
        path.write_text(
            json.dumps(
                {
                    "sample_id": "s0",
                    "label": "ball",
                    "candidate_image_ids": ["i0", "i1", "i2", "i3"],
                    "text_id": "t2",
                    "correct_index": 2,
                }
            )
            + "\n",
            encoding="utf-8",
        )
        samples = load_four_afc(path, images, texts)
        assert samples[0].candidate_scores == (0.0, 0.0, 1.0, 0.0)

    def test_embedding_slots_without_embeddings(self, tmp_path):
        path = tmp_path / "t.jsonl"
        path.write_text(
            json.dumps(
                {
                    "sample_id": "s0",
                    "label": "ball",
                    "candidate_image_ids": ["i0", "i1", "i2", "i3"],
                    "text_id": "t2",
                    "correct_index": 2,
                }
            )
            + "\n",
            encoding="utf-8",
        )
        with pytest.raises(MalformedLine):
            load_four_afc(path)

    def test_two_afc_embedding_slots(self, tmp_path):
        images, texts = self._embeddings()
        path = tmp_path / "t.jsonl"
        path.write_text(
            json.dumps(
                {
                    "sample_id": "s0",
                    "diff_type": "noun",
                    "image_id": "i1",
                    "pos_text_id": "t1",
                    "neg_text_id": "t0",
                }
            )
            + "\n",
            encoding="utf-8",
        )
        samples = load_two_afc(path, images, texts)
        assert samples[0].pos_score == 1.0
        assert samples[0].neg_score == 0.0

    def test_winoground_embedding_slots(self, tmp_path):
        images, texts = self._embeddings()
        path = tmp_path / "t.jsonl"
        path.write_text(
            json.dumps(
                {
                    "sample_id": "s0",
                    "pos_image_id": "i0",
                    "neg_image_id": "i1",
                    "pos_text_id": "t0",
                    "neg_text_id": "t1",
                }
            )
            + "\n",
            encoding="utf-8",
        )
        quads = load_winoground(path, images, texts)
        assert (quads[0].s_pp, quads[0].s_pn, quads[0].s_np, quads[0].s_nn) == (
            1.0,
            0.0,
            0.0,
            1.0,
        )

    def test_malformed_line_number(self, tmp_path):
        path = tmp_path / "t.jsonl"
        path.write_text('{"sample_id": "a"}\nnot json\n', encoding="utf-8")
        with pytest.raises(MalformedLine) as excinfo:
            load_two_afc(path)
        assert excinfo.value.line_no == 1  # missing fields already on line 1

    def test_bad_diff_type(self, tmp_path):
        path = tmp_path / "t.jsonl"
        path.write_text(
            json.dumps(
                {"sample_id": "s", "pos_score": 1.0, "neg_score": 0.0, "diff_type": "adverb"}
            )
            + "\n",
            encoding="utf-8",
        )
        with pytest.raises(MalformedLine):
            load_two_afc(path)
