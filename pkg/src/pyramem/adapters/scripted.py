"""Deterministic scripted adapters.

Every implementation here is a pure function of its inputs plus a fixed
seed: repeated calls produce byte-identical output.  They exist so the full
ingest/query control flow (and every test) runs without a language model,
and they speak the same raw-text wire formats a real model would.
"""

from __future__ import annotations

import hashlib
import json
import re
import time

import numpy as np

from ..ingest import ClipObservation, ExtractionResult
from ..types import FactNode, KeyframeRef, TimeSpan
from .base import AdapterFailure, AssessmentRequest, PruneRequest

_TOKEN_RE = re.compile(r"[a-z0-9]{4,}")
_DIRECTIVE_RE = re.compile(r">>([A-Za-z0-9]+)")


def token_set(text: str) -> set[str]:
    return set(_TOKEN_RE.findall(text.lower()))


class HashEmbedder:
    """Seeded hash-to-unit-sphere text embedder.

    Identical strings map to identical unit vectors; distinct strings map to
    essentially independent directions, which is all the engine needs from
    an embedding space at desk scale.
    """

    def __init__(self, dim: int = 64, seed: int = 0):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self._key = f"emb:{seed}".encode()

    def embed(self, text: str) -> np.ndarray:
        digest = hashlib.blake2b(text.encode("utf-8"), digest_size=16,
                                 key=self._key).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "big"))
        vec = rng.standard_normal(self.dim)
        norm = float(np.linalg.norm(vec))
        while norm < 1e-9:  # essentially unreachable, but cosine needs norm > 0
            vec = rng.standard_normal(self.dim)
            norm = float(np.linalg.norm(vec))
        return vec / norm


class ScriptedEventExtractor:
    """Turns a clip observation into one fact per stream event.

    String payloads become a single fact covering the clip.  The clip
    summary is the join of fact texts, so anything visible at fact level is
    also visible in the owning clip's summary.
    """

    def extract(self, obs: ClipObservation) -> ExtractionResult:
        facts: list[FactNode] = []
        if isinstance(obs.raw_payload, str):
            if obs.raw_payload.strip():
                facts.append(FactNode(id="", clip_id="", span=obs.span,
                                      text=obs.raw_payload.strip()))
        else:
            for ev in obs.raw_payload:
                keyframes = []
                if ev.media:
                    keyframes.append(KeyframeRef(timestamp=ev.t, uri=ev.media))
                span = TimeSpan(ev.t, ev.t)
                facts.append(FactNode(
                    id="", clip_id="", span=span, text=ev.text,
                    scene=ev.scene, asr=ev.asr,
                    asr_periods=[span] if ev.asr else [],
                    name_mentions=list(ev.names), keyframes=keyframes))
        summary = " ; ".join(f.text for f in facts)
        scene = next((f.scene for f in facts if f.scene), "")
        return ExtractionResult(facts=facts, clip_summary=summary, clip_scene=scene)


class KeywordLinkJudge:
    """Links the query fact to candidates sharing >= min_shared tokens."""

    def __init__(self, min_shared: int = 1):
        self.min_shared = min_shared

    def judge(self, query_fact: dict, candidates: list[dict]) -> str:
        q_tokens = token_set(str(query_fact.get("text", "")))
        links = []
        for cand in candidates:
            shared = sorted(q_tokens & token_set(str(cand.get("text", ""))))
            if len(shared) >= self.min_shared:
                links.append({
                    "target": cand["node_id"],
                    "description": "shares terms: " + ", ".join(shared[:4]),
                    "weight": round(min(1.0, 0.2 * len(shared)), 4),
                })
        return json.dumps({"links": links})


class DirectiveLinkJudge:
    """Follows explicit ``>>marker`` directives planted in fact texts.

    The query fact's directives name markers; a candidate whose plain text
    carries the marker token receives a link.  Directive substrings are
    stripped from candidate text first so only genuine marker occurrences
    match.  Used by the synthetic benchmark to plant exact evidence chains.
    """

    def judge(self, query_fact: dict, candidates: list[dict]) -> str:
        markers = _DIRECTIVE_RE.findall(str(query_fact.get("text", "")))
        links = []
        for cand in candidates:
            clean = _DIRECTIVE_RE.sub(" ", str(cand.get("text", "")))
            cand_tokens = token_set(clean)
            for marker in markers:
                if marker.lower() in cand_tokens:
                    links.append({
                        "target": cand["node_id"],
                        "description": f"continues {marker}",
                        "weight": 0.9,
                    })
                    break
        return json.dumps({"links": links})


class TokenOverlapPruner:
    """Retains passages sharing at least one informative token with the
    question; emits the selection as a plain integer list."""

    def select(self, request: PruneRequest) -> str:
        q_tokens = token_set(request.question)
        picked = [i for i, p in enumerate(request.passages)
                  if q_tokens & token_set(p.text)]
        return json.dumps(picked)


class SelectAllPruner:
    """Identity pruning: every candidate is retained."""

    def select(self, request: PruneRequest) -> str:
        return json.dumps(list(range(len(request.passages))))


class MarkerNodeAnswerer:
    """Oracle answer model: sufficient exactly when one of the target node
    ids is present in the shown passages."""

    def __init__(self, target_ids, answer_text: str):
        self.target_ids = set(target_ids)
        self.answer_text = answer_text

    def assess(self, request: AssessmentRequest) -> str:
        if any(p.node_id in self.target_ids for p in request.passages):
            return f"decisive evidence is in context. [ANSWER] {self.answer_text}"
        return "[Expand]"


class TokenCoverageAnswerer:
    """Generic scripted answer model: answers with the passage that shares
    the most informative tokens with the question, once coverage is high
    enough; otherwise asks to expand."""

    def __init__(self, min_shared: int = 2):
        self.min_shared = min_shared

    def assess(self, request: AssessmentRequest) -> str:
        q_tokens = token_set(request.question)
        best_i, best_shared = -1, 0
        for i, p in enumerate(request.passages):
            shared = len(q_tokens & token_set(p.text))
            if shared > best_shared:
                best_i, best_shared = i, shared
        if best_i >= 0 and best_shared >= self.min_shared:
            return f"matched passage {best_i}. [ANSWER] {request.passages[best_i].text}"
        return "[Expand]"


class SequenceModel:
    """Replays a fixed sequence of raw outputs; the last one repeats.

    Serves as both an answer model and a pruner in adversarial tests
    (malformed outputs, always-expand loops, out-of-range selections).
    """

    def __init__(self, outputs: list[str]):
        if not outputs:
            raise ValueError("outputs must be non-empty")
        self.outputs = list(outputs)
        self.calls = 0

    def _next(self) -> str:
        out = self.outputs[min(self.calls, len(self.outputs) - 1)]
        self.calls += 1
        return out

    def assess(self, request: AssessmentRequest) -> str:
        return self._next()

    def select(self, request: PruneRequest) -> str:
        return self._next()


class DelayedAnswerer:
    """Wraps an answer model with an injected per-passage delay, emulating
    context-length-proportional generation cost for latency studies."""

    def __init__(self, inner, delay_per_passage: float):
        self.inner = inner
        self.delay_per_passage = delay_per_passage

    def assess(self, request: AssessmentRequest) -> str:
        if self.delay_per_passage > 0:
            time.sleep(self.delay_per_passage * len(request.passages))
        return self.inner.assess(request)


class ConcatUpdater:
    """Global updater that folds clip summaries with a separator."""

    def __init__(self, sep: str = " | "):
        self.sep = sep

    def update(self, previous_summary: str, clip_summary: str) -> str:
        if not previous_summary:
            return clip_summary
        return previous_summary + self.sep + clip_summary


class AppendProfiler:
    """Profile builder that appends new character facts in order."""

    def merge(self, previous_profile: str, new_facts: list[str]) -> str:
        addition = "; ".join(new_facts)
        if not previous_profile:
            return addition
        if not addition:
            return previous_profile
        return previous_profile + "; " + addition


class FailingModel:
    """Raises on every call; stands in for an unreachable backend."""

    def __init__(self, message: str = "adapter backend unavailable"):
        self.message = message

    def _fail(self):
        raise AdapterFailure(self.message)

    def assess(self, request):
        self._fail()

    def select(self, request):
        self._fail()

    def judge(self, query_fact, candidates):
        self._fail()

    def update(self, previous_summary, clip_summary):
        self._fail()

    def merge(self, previous_profile, new_facts):
        self._fail()

    def extract(self, obs):
        self._fail()
