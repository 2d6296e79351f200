"""Adapter contracts: every model-dependent judgment sits behind one of
these protocols so the full engine control flow runs without any language
model.  Scripted implementations live in ``scripted``; a generic HTTP
implementation lives in ``remote``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Protocol, runtime_checkable

import numpy as np

if TYPE_CHECKING:
    from ..ingest import ClipObservation, ExtractionResult
    from ..types import KeyframeRef


class AdapterFailure(RuntimeError):
    """Hard adapter failure (transport, repeated timeouts).

    Carries a retry hint so callers can surface actionable errors; soft
    failures (unparseable output) are handled per-operation instead.
    """

    def __init__(self, message: str, retry_hint: str = "retry with backoff"):
        super().__init__(message)
        self.retry_hint = retry_hint


@dataclass
class AdapterConfig:
    """Binding of one adapter role to an implementation."""

    kind: str = "scripted"  # "scripted" | "remote"
    endpoint: str | None = None
    timeout: float = 30.0
    max_retries: int = 2
    prompt_template: str | None = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("scripted", "remote"):
            raise ValueError(f"unknown adapter kind {self.kind!r}")
        if self.kind == "remote" and not self.endpoint:
            raise ValueError("remote adapter requires an endpoint")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "endpoint": self.endpoint, "timeout": self.timeout,
                "max_retries": self.max_retries, "prompt_template": self.prompt_template,
                "options": dict(self.options)}

    @classmethod
    def from_dict(cls, d: dict) -> "AdapterConfig":
        return cls(kind=d.get("kind", "scripted"), endpoint=d.get("endpoint"),
                   timeout=float(d.get("timeout", 30.0)),
                   max_retries=int(d.get("max_retries", 2)),
                   prompt_template=d.get("prompt_template"),
                   options=dict(d.get("options", {})))


@dataclass(frozen=True)
class Passage:
    """One evidence node as shown to the selection and answer models."""

    node_id: str
    level: str  # "fact" | "clip"
    text: str
    start: float
    end: float


@dataclass(frozen=True)
class AssessmentRequest:
    """Everything the answer model sees on one turn."""

    question: str
    global_summary: str
    passages: tuple[Passage, ...]
    profiles: dict[str, str] = field(default_factory=dict)
    keyframes: tuple["KeyframeRef", ...] = ()
    options: tuple[str, ...] | None = None


@dataclass(frozen=True)
class PruneRequest:
    """Candidate passages shown to the node-selection model."""

    question: str
    global_summary: str
    passages: tuple[Passage, ...]
    profiles: dict[str, str] = field(default_factory=dict)


def passages_to_prompt_json(passages) -> str:
    """Render passages as the numbered JSON object the selection prompt
    expects; numbering is zero-based to match selection-index filtering."""
    doc = {}
    for i, p in enumerate(passages):
        if p.level == "fact":
            doc[str(i)] = {"text": p.text, "timestamp": p.start}
        else:
            doc[str(i)] = {"text": p.text, "timestamp_start": p.start,
                           "timestamp_end": p.end}
    return json.dumps(doc, ensure_ascii=False, indent=2)


@runtime_checkable
class Embedder(Protocol):
    """Deterministic map text -> fixed-dimension embedding vector."""

    dim: int

    def embed(self, text: str) -> np.ndarray: ...


class Extractor(Protocol):
    def extract(self, obs: "ClipObservation") -> "ExtractionResult": ...


class LinkJudge(Protocol):
    def judge(self, query_fact: dict, candidates: list[dict]) -> str:
        """Return raw model output: a JSON object with a "links" list."""
        ...


class Pruner(Protocol):
    def select(self, request: PruneRequest) -> str:
        """Return raw model output containing an integer list like [1, 3]."""
        ...


class ReasonModel(Protocol):
    def assess(self, request: AssessmentRequest) -> str:
        """Return raw model output ending in an answer or expand marker."""
        ...


class GlobalUpdater(Protocol):
    def update(self, previous_summary: str, clip_summary: str) -> str: ...


class Profiler(Protocol):
    def merge(self, previous_profile: str, new_facts: list[str]) -> str: ...
