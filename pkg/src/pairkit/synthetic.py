"""Seeded synthetic corpora for exercising the pipeline without real data.

Anchor records play the role of the in-domain recordings, candidate records
the general-domain pool. Image and text vectors for one record share a
latent direction plus independent noise, so image-text cosines spread
around the filter threshold and anchor-candidate cosines carry structure
for top-k matching. Everything is a pure function of the seed.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .embeddings import EmbeddingSet, save_embeddings
from .manifest import Manifest, PairRecord, write_manifest

_ADJS = ("big", "little", "red", "blue", "soft", "round", "shiny", "quiet")
_NOUNS = ("ball", "cup", "dog", "bird", "truck", "flower", "spoon", "chair")
_VERBS = ("rolls", "sits", "falls", "spins", "waits", "hides", "shines", "hops")


def _caption(rng: np.random.Generator) -> str:
    return (
        f"the {_ADJS[rng.integers(len(_ADJS))]} "
        f"{_NOUNS[rng.integers(len(_NOUNS))]} "
        f"{_VERBS[rng.integers(len(_VERBS))]}"
    )


def _unit(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    return (matrix / norms).astype(np.float32)


def build_synthetic_corpus(
    out_dir: str | Path,
    seed: int = 0,
    n_anchors: int = 200,
    n_candidates: int = 1000,
    dim: int = 16,
    noise: float = 2.0,
) -> dict[str, Path]:
    """Write manifests and embedding files for a small end-to-end run.

    Returns the paths keyed by role: anchors, candidates, anchor_images,
    anchor_texts, candidate_images.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    anchor_ids = [f"anc{i:05d}" for i in range(n_anchors)]
    candidate_ids = [f"cand{i:05d}" for i in range(n_candidates)]

    anchor_records = tuple(
        PairRecord(
            pair_id=pid,
            image_ref=f"frames/{pid}.jpg",
            caption=_caption(rng),
            source="saycam",
        )
        for pid in anchor_ids
    )
    candidate_records = tuple(
        PairRecord(
            pair_id=pid,
            image_ref=f"pool/{pid}.jpg",
            caption=_caption(rng),
            source="general",
        )
        for pid in candidate_ids
    )

    latents = rng.standard_normal((n_anchors, dim))
    anchor_img = _unit(latents + noise * rng.standard_normal((n_anchors, dim)))
    anchor_txt = _unit(latents + noise * rng.standard_normal((n_anchors, dim)))
    # candidates cluster around anchor latents so top-k rows are non-trivial
    owners = rng.integers(n_anchors, size=n_candidates)
    candidate_img = _unit(
        latents[owners] + noise * rng.standard_normal((n_candidates, dim))
    )

    paths = {
        "anchors": out_dir / "anchors.jsonl",
        "candidates": out_dir / "candidates.jsonl",
        "anchor_images": out_dir / "anchor_images.emb",
        "anchor_texts": out_dir / "anchor_texts.emb",
        "candidate_images": out_dir / "candidate_images.emb",
    }
    write_manifest(Manifest(anchor_records, provenance="synthetic anchors"), paths["anchors"])
    write_manifest(
        Manifest(candidate_records, provenance="synthetic candidates"), paths["candidates"]
    )
    save_embeddings(
        EmbeddingSet(
            ids=tuple(r.image_ref for r in anchor_records),
            vectors=anchor_img,
            normalized=True,
        ),
        paths["anchor_images"],
    )
    save_embeddings(
        EmbeddingSet(ids=tuple(anchor_ids), vectors=anchor_txt, normalized=True),
        paths["anchor_texts"],
    )
    save_embeddings(
        EmbeddingSet(
            ids=tuple(r.image_ref for r in candidate_records),
            vectors=candidate_img,
            normalized=True,
        ),
        paths["candidate_images"],
    )
    return paths


def random_unit_vectors(
    count: int, dim: int, seed: int = 0
) -> np.ndarray:
    """Seeded float32 unit vectors, for scale and property tests."""
    rng = np.random.default_rng(seed)
    return _unit(rng.standard_normal((count, dim)))
