"""Adapter contracts, scripted implementations, and the remote-HTTP backend."""

from .base import (
    AdapterConfig,
    AdapterFailure,
    AssessmentRequest,
    Embedder,
    Extractor,
    GlobalUpdater,
    LinkJudge,
    Passage,
    Profiler,
    PruneRequest,
    Pruner,
    ReasonModel,
    passages_to_prompt_json,
)
from .parsing import (
    PromptError,
    SelectionParseError,
    VerdictParseError,
    load_template,
    parse_selection,
    parse_verdict,
    render_prompt,
)

__all__ = [
    "AdapterConfig",
    "AdapterFailure",
    "AssessmentRequest",
    "Embedder",
    "Extractor",
    "GlobalUpdater",
    "LinkJudge",
    "Passage",
    "Profiler",
    "PruneRequest",
    "Pruner",
    "ReasonModel",
    "passages_to_prompt_json",
    "PromptError",
    "SelectionParseError",
    "VerdictParseError",
    "load_template",
    "parse_selection",
    "parse_verdict",
    "render_prompt",
]
