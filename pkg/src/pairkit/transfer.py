"""Caption transfer: rewrite captions into child-directed utterances.

A pluggable backend turns a rendered prompt into raw text; responses are
structured JSON carrying the rewritten caption and an infeasibility flag.
The deterministic mock backend derives its answer from a keyed hash of the
prompt, so the whole pipeline runs and tests without any external service.
Requests retry with jittered exponential backoff; infeasible and
permanently failed records land in a rejection log, never in the output.
"""

from __future__ import annotations

import json
import os
import random
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from hashlib import blake2b
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Protocol

from .errors import (
    BackendUnavailable,
    EmptyCaption,
    IoFailure,
    MalformedLine,
    MalformedResponse,
    MissingField,
    PairkitError,
)
from .manifest import Manifest, PairRecord


class BackendRequestError(PairkitError):
    """Transport-level failure of one request; retryable."""


class TransferBackend(Protocol):
    def send(self, prompt: str) -> str: ...


@dataclass(frozen=True)
class PromptTemplate:
    """Template with exactly one {} placeholder plus a verbatim few-shot block."""

    template: str
    few_shot: str = ""

    def __post_init__(self):
        if self.template.count("{}") != 1:
            raise ValueError("template must contain exactly one {} placeholder")


@dataclass(frozen=True)
class TransferResult:
    pair_id: str
    simplified: str
    feasible: bool
    attempts: int

    def __post_init__(self):
        if self.feasible and not self.simplified:
            raise ValueError("feasible result must carry a caption")
        if not self.feasible and self.simplified:
            raise ValueError("infeasible result must carry an empty caption")


@dataclass(frozen=True)
class RejectionRecord:
    pair_id: str
    reason: str
    attempts: int


@dataclass(frozen=True)
class BackendPolicy:
    """max_retries is the total attempt budget per record."""

    max_in_flight: int = 8
    max_retries: int = 3
    backoff_base: float = 0.25
    timeout: float = 30.0

    def __post_init__(self):
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.max_retries < 1:
            raise ValueError("max_retries must be >= 1")
        if self.backoff_base < 0:
            raise ValueError("backoff_base must be >= 0")


def default_template() -> PromptTemplate:
    text = (
        resources.files("pairkit").joinpath("templates/child_directed.txt").read_text("utf-8")
    )
    return PromptTemplate(template=text)


def load_template(path: str | Path) -> PromptTemplate:
    try:
        return PromptTemplate(template=Path(path).read_text("utf-8"))
    except OSError as exc:
        raise IoFailure(f"cannot read template {path}: {exc}") from exc


def render_prompt(template: PromptTemplate, caption: str) -> str:
    """Substitute the caption into the template; braces in the caption stay
    verbatim. The few-shot block, when present, is prepended unchanged."""
    if not caption.strip():
        raise EmptyCaption("cannot render a prompt for an empty caption")
    body = template.template.replace("{}", caption)
    if template.few_shot:
        return template.few_shot + "\n\n" + body
    return body


def _strip_code_fence(text: str) -> str:
    text = text.strip()
    if text.startswith("```") and text.endswith("```"):
        first_newline = text.find("\n")
        if first_newline != -1:
            return text[first_newline + 1 : -3].strip()
    return text


def parse_response(
    raw: str,
    caption_field: str = "caption",
    infeasible_field: str = "infeasible",
) -> tuple[str, bool]:
    """Extract (simplified, feasible) from a structured backend response.

    Surrounding whitespace and code fences are tolerated. An infeasible
    response always maps to (\"\", False).
    """
    text = _strip_code_fence(raw)
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedResponse(f"not valid JSON: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise MalformedResponse("response is not an object")
    if caption_field not in obj:
        raise MissingField(caption_field)
    if infeasible_field not in obj:
        raise MissingField(infeasible_field)
    caption = obj[caption_field]
    infeasible = obj[infeasible_field]
    if not isinstance(caption, str):
        raise MalformedResponse(f"field {caption_field!r} is not a string")
    if not isinstance(infeasible, bool):
        raise MalformedResponse(f"field {infeasible_field!r} is not a boolean")
    if infeasible:
        return "", False
    simplified = caption.strip()
    if not simplified:
        raise MalformedResponse("feasible response with an empty caption")
    return simplified, True


def serialize_result(result: TransferResult) -> str:
    """Inverse of parse_response for the mock and for logging."""
    return json.dumps(
        {"caption": result.simplified, "infeasible": not result.feasible},
        ensure_ascii=False,
    )


_NOUNS = ("ball", "doggy", "cup", "truck", "bird", "flower", "shoe", "apple", "kitty", "book")
_VERBS = ("rolling", "jumping", "sleeping", "eating", "splashing", "hiding", "waving", "dancing")
_ADJS = ("big", "little", "red", "happy", "soft", "wet")


@dataclass(frozen=True)
class MockBackend:
    """Deterministic stand-in: a keyed hash of the prompt picks the utterance
    and decides infeasibility at the configured rate."""

    seed: int = 0
    infeasible_rate: float = 0.1

    def send(self, prompt: str) -> str:
        digest = blake2b(
            prompt.encode("utf-8"),
            key=self.seed.to_bytes(8, "little", signed=False),
            digest_size=16,
        ).digest()
        value = int.from_bytes(digest, "little")
        if (value & 0xFFFFFF) / float(1 << 24) < self.infeasible_rate:
            return json.dumps({"caption": "", "infeasible": True})
        noun = _NOUNS[(value >> 24) % len(_NOUNS)]
        verb = _VERBS[(value >> 32) % len(_VERBS)]
        adj = _ADJS[(value >> 40) % len(_ADJS)]
        shapes = (
            f"look, a {adj} {noun}!",
            f"the {noun} is {verb}!",
            f"see the {noun}?",
            f"that {noun} is so {adj}!",
            f"the {adj} {noun} is {verb}!",
        )
        caption = shapes[(value >> 48) % len(shapes)]
        return json.dumps({"caption": caption, "infeasible": False})


@dataclass(frozen=True)
class HttpBackend:
    """POSTs JSON {prompt_field: prompt} to the endpoint; reads the response
    body as raw text, or a JSON field when response_field is set. The bearer
    token comes from the TRANSFER_BACKEND_TOKEN environment variable."""

    endpoint: str
    prompt_field: str = "prompt"
    response_field: str | None = None
    timeout: float = 30.0
    token_env: str = "TRANSFER_BACKEND_TOKEN"

    def send(self, prompt: str) -> str:
        body = json.dumps({self.prompt_field: prompt}).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        request = urllib.request.Request(
            self.endpoint, data=body, headers=headers, method="POST"
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                raw = response.read().decode("utf-8")
        except (urllib.error.URLError, OSError, TimeoutError) as exc:
            raise BackendRequestError(str(exc)) from exc
        if self.response_field is None:
            return raw
        try:
            obj = json.loads(raw)
            return obj[self.response_field]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise BackendRequestError(
                f"response body lacks field {self.response_field!r}"
            ) from exc


def _transfer_one(
    record: PairRecord,
    backend: TransferBackend,
    template: PromptTemplate,
    policy: BackendPolicy,
    sleep: Callable[[float], None],
) -> tuple[TransferResult | None, RejectionRecord | None]:
    prompt = render_prompt(template, record.caption)
    last_reason = "unknown"
    for attempt in range(1, policy.max_retries + 1):
        try:
            raw = backend.send(prompt)
        except BackendRequestError as exc:
            last_reason = f"backend_error: {exc}"
        else:
            try:
                simplified, feasible = parse_response(raw)
            except (MalformedResponse, MissingField) as exc:
                last_reason = f"malformed_response: {exc}"
            else:
                if feasible:
                    return TransferResult(record.pair_id, simplified, True, attempt), None
                return None, RejectionRecord(record.pair_id, "infeasible", attempt)
        if attempt < policy.max_retries and policy.backoff_base > 0:
            sleep(policy.backoff_base * (2 ** (attempt - 1)) * (1.0 + 0.25 * random.random()))
    return None, RejectionRecord(record.pair_id, last_reason, policy.max_retries)


def run_transfer(
    manifest: Manifest,
    backend: TransferBackend,
    template: PromptTemplate | None = None,
    policy: BackendPolicy | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> tuple[Manifest, list[RejectionRecord]]:
    """Transfer every record's caption; returns (feasible records, rejections).

    Feasible results become records with source=\"transferred\" and a cleared
    similarity. Output and rejection log are sorted by pair_id, so results
    do not depend on scheduling. Raises BackendUnavailable when the backend
    never produced a response for any record.
    """
    template = template or default_template()
    policy = policy or BackendPolicy()
    records = list(manifest)
    outcomes: list[tuple[TransferResult | None, RejectionRecord | None]] = []
    if records:
        with ThreadPoolExecutor(max_workers=policy.max_in_flight) as pool:
            outcomes = list(
                pool.map(
                    lambda rec: _transfer_one(rec, backend, template, policy, sleep),
                    records,
                )
            )
    by_id = {rec.pair_id: rec for rec in records}
    transferred: list[PairRecord] = []
    rejections: list[RejectionRecord] = []
    for result, rejection in outcomes:
        if result is not None:
            original = by_id[result.pair_id]
            transferred.append(
                PairRecord(
                    pair_id=original.pair_id,
                    image_ref=original.image_ref,
                    caption=result.simplified,
                    source="transferred",
                    similarity=None,
                )
            )
        else:
            rejections.append(rejection)
    if records and not transferred and all(
        r.reason.startswith("backend_error") for r in rejections
    ):
        raise BackendUnavailable(
            f"backend produced no response for any of {len(records)} records"
        )
    transferred.sort(key=lambda r: r.pair_id)
    rejections.sort(key=lambda r: r.pair_id)
    out = Manifest(
        tuple(transferred),
        provenance=f"{manifest.provenance} | transfer({len(transferred)} feasible)",
    )
    return out, rejections


def write_rejections(rejections: Iterable[RejectionRecord], path: str | Path) -> None:
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            for rej in rejections:
                fh.write(
                    json.dumps(
                        {
                            "pair_id": rej.pair_id,
                            "reason": rej.reason,
                            "attempts": rej.attempts,
                        },
                        ensure_ascii=False,
                    )
                )
                fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_rejections(path: str | Path) -> list[RejectionRecord]:
    path = Path(path)
    rejections = []
    try:
        with path.open("r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                stripped = line.strip()
                if not stripped:
                    continue
                try:
                    obj = json.loads(stripped)
                    rejections.append(
                        RejectionRecord(
                            pair_id=str(obj["pair_id"]),
                            reason=str(obj["reason"]),
                            attempts=int(obj["attempts"]),
                        )
                    )
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise MalformedLine(line_no, f"bad rejection record: {exc}") from exc
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return rejections
