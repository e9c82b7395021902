"""Exception hierarchy shared by every pairkit module.

All data-level failures derive from PairkitError so the CLI can map them to a
single exit code; backend transport failures get their own branch.
"""

from __future__ import annotations


class PairkitError(Exception):
    """Base class for all toolkit errors."""


# --- manifest ---

class MalformedLine(PairkitError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class DuplicatePairId(PairkitError):
    def __init__(self, pair_id: str):
        super().__init__(f"duplicate pair_id {pair_id!r}")
        self.pair_id = pair_id


class IoFailure(PairkitError):
    pass


# --- embedding store ---

class BadMagic(PairkitError):
    pass


class DimensionMismatch(PairkitError):
    pass


class TruncatedFile(PairkitError):
    pass


class DuplicateId(PairkitError):
    def __init__(self, vec_id: str):
        super().__init__(f"duplicate embedding id {vec_id!r}")
        self.vec_id = vec_id


class ZeroVector(PairkitError):
    def __init__(self, vec_id: str):
        super().__init__(f"zero vector for id {vec_id!r}")
        self.vec_id = vec_id


class UnknownId(PairkitError):
    def __init__(self, ident: str):
        super().__init__(f"unknown id {ident!r}")
        self.ident = ident


class NotNormalized(PairkitError):
    pass


# --- pair filter ---

class MissingSimilarity(PairkitError):
    def __init__(self, pair_id: str):
        super().__init__(f"record {pair_id!r} has no similarity")
        self.pair_id = pair_id


# --- assignment matcher ---

class NoPerfectMatching(PairkitError):
    def __init__(self, rows: tuple[int, ...]):
        super().__init__(f"no column-distinct assignment covers rows {list(rows)}")
        self.rows = rows


class EmptyMatrix(PairkitError):
    pass


class TooLarge(PairkitError):
    pass


class UnknownColumn(PairkitError):
    def __init__(self, column: int | str):
        super().__init__(f"assignment references unknown column {column!r}")
        self.column = column


# --- caption transfer ---

class EmptyCaption(PairkitError):
    pass


class MalformedResponse(PairkitError):
    def __init__(self, reason: str):
        super().__init__(f"malformed backend response: {reason}")
        self.reason = reason


class MissingField(PairkitError):
    def __init__(self, name: str):
        super().__init__(f"backend response missing field {name!r}")
        self.name = name


class BackendUnavailable(PairkitError):
    pass


# --- benchmark scorers ---

class EmptyInput(PairkitError):
    pass


class EmptyReference(PairkitError):
    pass


class NothingScored(PairkitError):
    pass
