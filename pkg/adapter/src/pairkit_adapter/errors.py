"""Adapter-side errors."""

from __future__ import annotations


class AdapterError(Exception):
    pass


class UndecodableImage(AdapterError):
    def __init__(self, image_id: str, reason: str):
        super().__init__(f"cannot decode image {image_id!r}: {reason}")
        self.image_id = image_id


class EmptyCaption(AdapterError):
    def __init__(self, text_id: str):
        super().__init__(f"caption for {text_id!r} is empty")
        self.text_id = text_id


class DuplicateId(AdapterError):
    def __init__(self, ident: str):
        super().__init__(f"duplicate id {ident!r}")
        self.ident = ident


class MissingSample(AdapterError):
    def __init__(self, sample_id: str):
        super().__init__(f"model outputs missing sample {sample_id!r}")
        self.sample_id = sample_id
