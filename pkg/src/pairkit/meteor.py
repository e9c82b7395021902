"""Unigram-alignment caption metric with a fragmentation penalty.

Candidate and reference tokens are aligned stage by stage (exact match
first, then stemmed match on leftovers), each token used at most once and
each stage taking a maximum-cardinality matching; among those, the
alignment with the fewest crossings wins. With m matches, precision
P = m/|candidate| and recall R = m/|reference| combine into the
recall-weighted mean P*R*(1+w)/(R + w*P), discounted by
gamma * (chunks/m)^beta where a chunk is a maximal run of matches adjacent
in both strings.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from itertools import combinations
from math import comb, prod

from .errors import EmptyReference
from .stemmer import stem

STAGES = ("exact", "stem")

# Exhaustive crossing minimization is capped; longer inputs or larger search
# spaces fall back to the lowest-position choice per token group.
_SEARCH_LEAF_BUDGET = 100_000
_SEARCH_TOKEN_LIMIT = 50

_PUNCT = string.punctuation


@dataclass(frozen=True)
class MeteorConfig:
    fmean_recall_weight: float = 9.0
    penalty_gamma: float = 0.5
    penalty_beta: float = 3.0
    stages: tuple[str, ...] = ("exact", "stem")

    def __post_init__(self):
        if not self.stages:
            raise ValueError("at least one matching stage is required")
        if len(set(self.stages)) != len(self.stages):
            raise ValueError("stages must not repeat")
        for name in self.stages:
            if name not in STAGES:
                raise ValueError(f"unknown stage {name!r}")


def tokenize(text: str) -> list[str]:
    """Lowercase, strip leading/trailing ASCII punctuation per token, split
    on whitespace; purely-punctuation tokens vanish."""
    tokens = []
    for raw in text.lower().split():
        token = raw.strip(_PUNCT)
        if token:
            tokens.append(token)
    return tokens


def _stage_key(token: str, stage: str) -> str:
    return token if stage == "exact" else stem(token)


def _crossings(pair: tuple[int, int], others: list[tuple[int, int]]) -> int:
    ci, ri = pair
    count = 0
    for cj, rj in others:
        if (ci - cj) * (ri - rj) < 0:
            count += 1
    return count


def _min_crossing_choice(
    options: list[tuple[list[tuple[int, ...]], list[tuple[int, ...]]]],
    fixed: list[tuple[int, int]],
) -> list[tuple[int, int]]:
    """Pick per-group participant subsets minimizing total crossings.

    Each group's chosen candidate and reference positions are paired in
    sorted order, which is never worse than any other within-group pairing.
    """
    best: list[tuple[int, int]] | None = None
    best_cost = float("inf")

    def recurse(idx: int, chosen: list[tuple[int, int]], cost: int) -> None:
        nonlocal best, best_cost
        if cost >= best_cost:
            return
        if idx == len(options):
            best = list(chosen[len(fixed):])
            best_cost = cost
            return
        cand_opts, ref_opts = options[idx]
        for cand_subset in cand_opts:
            for ref_subset in ref_opts:
                new_pairs = list(zip(cand_subset, ref_subset))
                delta = 0
                for pair in new_pairs:
                    delta += _crossings(pair, chosen)
                if cost + delta >= best_cost:
                    continue
                recurse(idx + 1, chosen + new_pairs, cost + delta)

    recurse(0, list(fixed), 0)
    assert best is not None
    return best


def _align_stage(
    cand_tokens: list[str],
    ref_tokens: list[str],
    stage: str,
    matched: list[tuple[int, int]],
) -> list[tuple[int, int]]:
    used_c = {c for c, _ in matched}
    used_r = {r for _, r in matched}
    groups: dict[str, tuple[list[int], list[int]]] = {}
    for i, token in enumerate(cand_tokens):
        if i not in used_c:
            groups.setdefault(_stage_key(token, stage), ([], []))[0].append(i)
    for j, token in enumerate(ref_tokens):
        if j not in used_r:
            key = _stage_key(token, stage)
            if key in groups:
                groups[key][1].append(j)

    options = []
    leaves = 1
    for key in sorted(groups):
        cand_pos, ref_pos = groups[key]
        size = min(len(cand_pos), len(ref_pos))
        if size == 0:
            continue
        options.append(
            (
                list(combinations(cand_pos, size)),
                list(combinations(ref_pos, size)),
            )
        )
        leaves *= comb(len(cand_pos), size) * comb(len(ref_pos), size)
    if not options:
        return []

    total_tokens = len(cand_tokens) + len(ref_tokens)
    if leaves > _SEARCH_LEAF_BUDGET or total_tokens > 2 * _SEARCH_TOKEN_LIMIT:
        # greedy fallback: lowest positions per group
        new_pairs: list[tuple[int, int]] = []
        for cand_opts, ref_opts in options:
            new_pairs.extend(zip(cand_opts[0], ref_opts[0]))
        return new_pairs
    return _min_crossing_choice(options, matched)


def align(
    cand_tokens: list[str],
    ref_tokens: list[str],
    stages: tuple[str, ...] = ("exact", "stem"),
) -> list[tuple[int, int]]:
    """Match candidate to reference token positions, one use per token.

    Returns (candidate_index, reference_index) pairs sorted by candidate
    position, accumulated over the configured stages.
    """
    matched: list[tuple[int, int]] = []
    for stage in stages:
        matched.extend(_align_stage(cand_tokens, ref_tokens, stage, matched))
    return sorted(matched)


def count_chunks(matches: list[tuple[int, int]]) -> int:
    """Maximal runs of matches adjacent in both candidate and reference."""
    if not matches:
        return 0
    ordered = sorted(matches)
    chunks = 1
    for (c_prev, r_prev), (c_cur, r_cur) in zip(ordered, ordered[1:]):
        if c_cur != c_prev + 1 or r_cur != r_prev + 1:
            chunks += 1
    return chunks


def meteor_score(
    candidate: str, reference: str, config: MeteorConfig | None = None
) -> float:
    """Score one candidate against one reference; 0 when nothing aligns."""
    config = config or MeteorConfig()
    cand_tokens = tokenize(candidate)
    ref_tokens = tokenize(reference)
    if not ref_tokens:
        raise EmptyReference("reference is empty after tokenization")
    if not cand_tokens:
        return 0.0
    matches = align(cand_tokens, ref_tokens, config.stages)
    m = len(matches)
    if m == 0:
        return 0.0
    precision = m / len(cand_tokens)
    recall = m / len(ref_tokens)
    w = config.fmean_recall_weight
    fmean = precision * recall * (1.0 + w) / (recall + w * precision)
    chunks = count_chunks(matches)
    penalty = config.penalty_gamma * (chunks / m) ** config.penalty_beta
    return fmean * (1.0 - penalty)
