"""The four in-domain benchmark scorers and the score report.

Samples arrive either with scores already filled in or with embedding-id
slots that cosine_score_samples resolves against normalized embedding sets.
Ties always count as failures: a constant scorer earns nothing.

Group scores follow the four cross comparisons of an original/synthetic
pair quad. The positive-context score requires each image to pick its own
phrase (s_pp > s_pn and s_nn > s_np); the negative-context score requires
each phrase to pick its own image (s_pp > s_np and s_nn > s_pn); the
overall score requires all four. Chance levels are 0.25, 0.25 and 1/6.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .embeddings import EmbeddingSet, unit_dot
from .errors import (
    EmptyInput,
    IoFailure,
    MalformedLine,
    NotNormalized,
    NothingScored,
)
from .meteor import MeteorConfig, meteor_score

DIFF_TYPES = (
    "verb",
    "adjective",
    "noun",
    "verb_noun",
    "adjective_noun",
    "verb_adjective",
)


@dataclass(frozen=True)
class FourAFCSample:
    sample_id: str
    label: str
    candidate_scores: tuple[float, float, float, float]
    correct_index: int

    def __post_init__(self):
        if len(self.candidate_scores) != 4:
            raise ValueError(f"sample {self.sample_id!r}: need exactly 4 scores")
        if not 0 <= self.correct_index < 4:
            raise ValueError(f"sample {self.sample_id!r}: correct_index out of range")


@dataclass(frozen=True)
class TwoAFCSample:
    sample_id: str
    pos_score: float
    neg_score: float
    diff_type: str

    def __post_init__(self):
        if self.diff_type not in DIFF_TYPES:
            raise ValueError(
                f"sample {self.sample_id!r}: diff_type {self.diff_type!r} "
                f"not one of {DIFF_TYPES}"
            )


@dataclass(frozen=True)
class WinoQuad:
    """Scores s_xy: first index is the image polarity (p = original frame,
    n = synthetic), second the caption polarity."""

    sample_id: str
    s_pp: float
    s_pn: float
    s_np: float
    s_nn: float

    def __post_init__(self):
        for name in ("s_pp", "s_pn", "s_np", "s_nn"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"sample {self.sample_id!r}: {name} is not finite")


@dataclass(frozen=True)
class CaptionSample:
    sample_id: str
    reference: str
    candidate: str

    def __post_init__(self):
        if not self.reference.strip():
            raise ValueError(f"sample {self.sample_id!r}: reference is empty")


@dataclass(frozen=True)
class WinogroundScores:
    overall: float
    positive_context: float
    negative_context: float


@dataclass(frozen=True)
class ScoreReport:
    labeled_s_accuracy: float | None = None
    vtwt_accuracy: float | None = None
    vtwt_by_type: Mapping[str, float] | None = None
    winoground: WinogroundScores | None = None
    caption_meteor_mean: float | None = None
    counts: Mapping[str, object] = field(default_factory=dict)


def score_four_afc(samples: Sequence[FourAFCSample]) -> float:
    """Fraction where the correct candidate is the strict unique maximum."""
    if not samples:
        raise EmptyInput("no 4-AFC samples")
    hits = 0
    for s in samples:
        target = s.candidate_scores[s.correct_index]
        if all(
            target > score
            for i, score in enumerate(s.candidate_scores)
            if i != s.correct_index
        ):
            hits += 1
    return hits / len(samples)


def score_two_afc(
    samples: Sequence[TwoAFCSample],
) -> tuple[float, dict[str, float]]:
    """Overall accuracy plus accuracy per difference type (absent types omitted)."""
    if not samples:
        raise EmptyInput("no 2-AFC samples")
    hits = 0
    type_hits: dict[str, int] = {}
    type_totals: dict[str, int] = {}
    for s in samples:
        hit = s.pos_score > s.neg_score
        hits += hit
        type_totals[s.diff_type] = type_totals.get(s.diff_type, 0) + 1
        type_hits[s.diff_type] = type_hits.get(s.diff_type, 0) + hit
    by_type = {
        diff: type_hits[diff] / type_totals[diff]
        for diff in DIFF_TYPES
        if diff in type_totals
    }
    return hits / len(samples), by_type


def score_winoground(quads: Sequence[WinoQuad]) -> WinogroundScores:
    """Mean per-quad indicators for the three group scores; ties fail."""
    if not quads:
        raise EmptyInput("no winoground quads")
    pos = neg = both = 0
    for q in quads:
        image_context = q.s_pp > q.s_pn and q.s_nn > q.s_np
        phrase_context = q.s_pp > q.s_np and q.s_nn > q.s_pn
        pos += image_context
        neg += phrase_context
        both += image_context and phrase_context
    n = len(quads)
    return WinogroundScores(
        overall=both / n, positive_context=pos / n, negative_context=neg / n
    )


def score_captions(
    samples: Sequence[CaptionSample], config: MeteorConfig | None = None
) -> float:
    """Mean caption metric over the samples."""
    if not samples:
        raise EmptyInput("no caption samples")
    config = config or MeteorConfig()
    total = 0.0
    for s in samples:
        total += meteor_score(s.candidate, s.reference, config)
    return total / len(samples)


def cosine_score_samples(
    pairs: Sequence[tuple[str, str]],
    images: EmbeddingSet,
    texts: EmbeddingSet,
) -> list[float]:
    """Fill comparison slots with the cosine of each (image id, text id) pair."""
    if not images.normalized or not texts.normalized:
        raise NotNormalized("cosine_score_samples requires normalized sets")
    return [unit_dot(images.vector(i), texts.vector(t)) for i, t in pairs]


def build_report(
    four_afc: Sequence[FourAFCSample] | None = None,
    two_afc: Sequence[TwoAFCSample] | None = None,
    winoground: Sequence[WinoQuad] | None = None,
    captions: Sequence[CaptionSample] | None = None,
    meteor_config: MeteorConfig | None = None,
) -> ScoreReport:
    """Score every provided task and assemble the report with sample counts.

    Tasks not provided stay absent from the report rather than being
    zero-filled; providing nothing raises NothingScored.
    """
    if four_afc is None and two_afc is None and winoground is None and captions is None:
        raise NothingScored("no task data provided")
    labeled_s_accuracy = None
    vtwt_accuracy = None
    vtwt_by_type = None
    wg = None
    caption_mean = None
    counts: dict[str, object] = {}
    if four_afc is not None:
        labeled_s_accuracy = score_four_afc(four_afc)
        counts["labeled_s"] = len(four_afc)
    if two_afc is not None:
        vtwt_accuracy, vtwt_by_type = score_two_afc(two_afc)
        counts["vtwt"] = len(two_afc)
        type_counts: dict[str, int] = {}
        for s in two_afc:
            type_counts[s.diff_type] = type_counts.get(s.diff_type, 0) + 1
        counts["vtwt_by_type"] = {
            diff: type_counts[diff] for diff in DIFF_TYPES if diff in type_counts
        }
    if winoground is not None:
        wg = score_winoground(winoground)
        counts["winoground"] = len(winoground)
    if captions is not None:
        caption_mean = score_captions(captions, meteor_config)
        counts["caption"] = len(captions)
    return ScoreReport(
        labeled_s_accuracy=labeled_s_accuracy,
        vtwt_accuracy=vtwt_accuracy,
        vtwt_by_type=vtwt_by_type,
        winoground=wg,
        caption_meteor_mean=caption_mean,
        counts=counts,
    )


def _round4(value: float) -> float:
    return round(value, 4)


def report_to_dict(report: ScoreReport) -> dict:
    """Report document with floats at 4 decimal places, absent tasks omitted."""
    doc: dict[str, object] = {}
    if report.labeled_s_accuracy is not None:
        doc["labeled_s_accuracy"] = _round4(report.labeled_s_accuracy)
    if report.vtwt_accuracy is not None:
        doc["vtwt_accuracy"] = _round4(report.vtwt_accuracy)
    if report.vtwt_by_type is not None:
        doc["vtwt_by_type"] = {k: _round4(v) for k, v in report.vtwt_by_type.items()}
    if report.winoground is not None:
        doc["winoground"] = {
            "overall": _round4(report.winoground.overall),
            "positive_context": _round4(report.winoground.positive_context),
            "negative_context": _round4(report.winoground.negative_context),
        }
    if report.caption_meteor_mean is not None:
        doc["caption_meteor_mean"] = _round4(report.caption_meteor_mean)
    doc["counts"] = dict(report.counts)
    return doc


def write_report(report: ScoreReport, path: str | Path) -> None:
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            json.dump(report_to_dict(report), fh, ensure_ascii=False, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_report(path: str | Path) -> dict:
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


# --- task file loading -------------------------------------------------------

def _iter_json_lines(path: Path) -> Iterable[tuple[int, dict]]:
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
                if not isinstance(obj, dict):
                    raise MalformedLine(line_no, "record is not an object")
                yield line_no, obj
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def _need(obj: dict, name: str, line_no: int):
    if name not in obj:
        raise MalformedLine(line_no, f"missing field {name!r}")
    return obj[name]


def _embeddings_or_fail(
    images: EmbeddingSet | None, texts: EmbeddingSet | None, line_no: int
) -> tuple[EmbeddingSet, EmbeddingSet]:
    if images is None or texts is None:
        raise MalformedLine(
            line_no, "record carries embedding ids but no embeddings were supplied"
        )
    return images, texts


def load_four_afc(
    path: str | Path,
    images: EmbeddingSet | None = None,
    texts: EmbeddingSet | None = None,
) -> list[FourAFCSample]:
    samples = []
    for line_no, obj in _iter_json_lines(Path(path)):
        sample_id = str(_need(obj, "sample_id", line_no))
        label = str(_need(obj, "label", line_no))
        correct = int(_need(obj, "correct_index", line_no))
        if "candidate_scores" in obj:
            scores = tuple(float(x) for x in obj["candidate_scores"])
        else:
            img, txt = _embeddings_or_fail(images, texts, line_no)
            image_ids = _need(obj, "candidate_image_ids", line_no)
            text_id = str(_need(obj, "text_id", line_no))
            scores = tuple(
                cosine_score_samples([(str(i), text_id) for i in image_ids], img, txt)
            )
        try:
            samples.append(
                FourAFCSample(
                    sample_id=sample_id,
                    label=label,
                    candidate_scores=scores,
                    correct_index=correct,
                )
            )
        except ValueError as exc:
            raise MalformedLine(line_no, str(exc)) from exc
    return samples


def load_two_afc(
    path: str | Path,
    images: EmbeddingSet | None = None,
    texts: EmbeddingSet | None = None,
) -> list[TwoAFCSample]:
    samples = []
    for line_no, obj in _iter_json_lines(Path(path)):
        sample_id = str(_need(obj, "sample_id", line_no))
        diff_type = str(_need(obj, "diff_type", line_no))
        if "pos_score" in obj or "neg_score" in obj:
            pos = float(_need(obj, "pos_score", line_no))
            neg = float(_need(obj, "neg_score", line_no))
        else:
            img, txt = _embeddings_or_fail(images, texts, line_no)
            image_id = str(_need(obj, "image_id", line_no))
            pos_text = str(_need(obj, "pos_text_id", line_no))
            neg_text = str(_need(obj, "neg_text_id", line_no))
            pos, neg = cosine_score_samples(
                [(image_id, pos_text), (image_id, neg_text)], img, txt
            )
        try:
            samples.append(
                TwoAFCSample(
                    sample_id=sample_id,
                    pos_score=pos,
                    neg_score=neg,
                    diff_type=diff_type,
                )
            )
        except ValueError as exc:
            raise MalformedLine(line_no, str(exc)) from exc
    return samples


def load_winoground(
    path: str | Path,
    images: EmbeddingSet | None = None,
    texts: EmbeddingSet | None = None,
) -> list[WinoQuad]:
    quads = []
    for line_no, obj in _iter_json_lines(Path(path)):
        sample_id = str(_need(obj, "sample_id", line_no))
        if "s_pp" in obj:
            values = {
                name: float(_need(obj, name, line_no))
                for name in ("s_pp", "s_pn", "s_np", "s_nn")
            }
        else:
            img, txt = _embeddings_or_fail(images, texts, line_no)
            pos_image = str(_need(obj, "pos_image_id", line_no))
            neg_image = str(_need(obj, "neg_image_id", line_no))
            pos_text = str(_need(obj, "pos_text_id", line_no))
            neg_text = str(_need(obj, "neg_text_id", line_no))
            slots = cosine_score_samples(
                [
                    (pos_image, pos_text),
                    (pos_image, neg_text),
                    (neg_image, pos_text),
                    (neg_image, neg_text),
                ],
                img,
                txt,
            )
            values = dict(zip(("s_pp", "s_pn", "s_np", "s_nn"), slots))
        try:
            quads.append(WinoQuad(sample_id=sample_id, **values))
        except ValueError as exc:
            raise MalformedLine(line_no, str(exc)) from exc
    return quads


def load_captions(path: str | Path) -> list[CaptionSample]:
    samples = []
    for line_no, obj in _iter_json_lines(Path(path)):
        try:
            samples.append(
                CaptionSample(
                    sample_id=str(_need(obj, "sample_id", line_no)),
                    reference=str(_need(obj, "reference", line_no)),
                    candidate=str(_need(obj, "candidate", line_no)),
                )
            )
        except ValueError as exc:
            raise MalformedLine(line_no, str(exc)) from exc
    return samples
