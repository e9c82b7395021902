"""Encoders producing unit-normalized float32 vectors.

HashEncoder is the dependency-light default: text by token feature hashing,
images by a fixed random projection of downsampled pixels. It is fully
deterministic given the input bytes, which is what the format-contract
tests need. ClipEncoder wraps a pretrained vision-language checkpoint via
transformers and is only importable when the optional ML stack is present.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from hashlib import blake2b
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import EmptyCaption, UndecodableImage

_THUMB = 16  # images are downsampled to _THUMB x _THUMB RGB before projection
_PROJECTION_SEED = 0x9A1C


@dataclass(frozen=True)
class AdapterConfig:
    encoder: str = "hash"
    device: str = "cpu"
    batch_size: int = 16
    dim: int = 256

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")


def _unit_f32(vector: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vector.astype(np.float64)))
    return (vector.astype(np.float64) / norm).astype(np.float32)


class HashEncoder:
    """Deterministic stand-in encoder; no model weights involved."""

    def __init__(self, dim: int = 256):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        rng = np.random.default_rng(_PROJECTION_SEED)
        self._projection = rng.standard_normal((_THUMB * _THUMB * 3, dim))

    def encode_text(self, text_id: str, caption: str) -> np.ndarray:
        tokens = caption.lower().split()
        if not tokens:
            raise EmptyCaption(text_id)
        vector = np.zeros(self.dim, dtype=np.float64)
        for token in tokens:
            digest = blake2b(token.encode("utf-8"), digest_size=8).digest()
            value = int.from_bytes(digest, "little")
            index = value % self.dim
            sign = 1.0 if (value >> 63) & 1 else -1.0
            vector[index] += sign
        if not vector.any():
            # tokens cancelled; fall back to hashing the whole caption
            digest = blake2b(caption.encode("utf-8"), digest_size=8).digest()
            vector[int.from_bytes(digest, "little") % self.dim] = 1.0
        return _unit_f32(vector)

    def encode_image(self, image_id: str, source: str | Path | bytes) -> np.ndarray:
        try:
            if isinstance(source, bytes):
                image = Image.open(io.BytesIO(source))
            else:
                image = Image.open(source)
            image = image.convert("RGB").resize(
                (_THUMB, _THUMB), Image.Resampling.BILINEAR
            )
        except (UnidentifiedImageError, OSError, ValueError) as exc:
            raise UndecodableImage(image_id, str(exc)) from exc
        pixels = np.asarray(image, dtype=np.float64).reshape(-1) / 255.0
        vector = pixels @ self._projection
        if not vector.any():
            vector = np.zeros(self.dim)
            vector[0] = 1.0
        return _unit_f32(vector)


class ClipEncoder:
    """Pretrained contrastive encoder via transformers; needs the optional
    ML dependencies and locally available weights."""

    def __init__(self, model_name: str, device: str = "cpu", batch_size: int = 16):
        try:
            import torch  # noqa: F401
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise RuntimeError(
                "the clip encoder needs the [clip] extra (torch, transformers)"
            ) from exc
        self.batch_size = batch_size
        self.device = device
        self._model = CLIPModel.from_pretrained(model_name).to(device).eval()
        self._processor = CLIPProcessor.from_pretrained(model_name)

    def encode_texts(self, captions: list[str]) -> np.ndarray:
        import torch

        chunks = []
        with torch.no_grad():
            for start in range(0, len(captions), self.batch_size):
                batch = captions[start : start + self.batch_size]
                inputs = self._processor(
                    text=batch, return_tensors="pt", padding=True, truncation=True
                ).to(self.device)
                features = self._model.get_text_features(**inputs)
                chunks.append(features.cpu().numpy())
        stacked = np.concatenate(chunks).astype(np.float64)
        return (stacked / np.linalg.norm(stacked, axis=1, keepdims=True)).astype(
            np.float32
        )

    def encode_images(self, images: list) -> np.ndarray:
        import torch

        chunks = []
        with torch.no_grad():
            for start in range(0, len(images), self.batch_size):
                batch = images[start : start + self.batch_size]
                inputs = self._processor(images=batch, return_tensors="pt").to(
                    self.device
                )
                features = self._model.get_image_features(**inputs)
                chunks.append(features.cpu().numpy())
        stacked = np.concatenate(chunks).astype(np.float64)
        return (stacked / np.linalg.norm(stacked, axis=1, keepdims=True)).astype(
            np.float32
        )


def make_encoder(config: AdapterConfig):
    """encoder spec: 'hash', 'hash:<dim>' or 'clip:<model name>'."""
    name = config.encoder
    if name == "hash":
        return HashEncoder(dim=config.dim)
    if name.startswith("hash:"):
        return HashEncoder(dim=int(name.split(":", 1)[1]))
    if name.startswith("clip:"):
        return ClipEncoder(
            name.split(":", 1)[1], device=config.device, batch_size=config.batch_size
        )
    raise ValueError(f"unknown encoder {name!r}")
