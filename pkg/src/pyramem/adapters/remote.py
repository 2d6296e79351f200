"""Generic remote-HTTP adapter.

Wire format is the lowest common denominator over hosted model gateways:
one POST per call with ``{"prompt": str, "images": [uri-or-base64, ...]}``
returning ``{"text": str}``.  Provider specifics (auth schemes, SDKs) stay
outside the engine; credentials come from the environment.
"""

from __future__ import annotations

import json
import os
import threading

import httpx

from .base import AdapterConfig, AdapterFailure, AssessmentRequest, PruneRequest, \
    passages_to_prompt_json
from .parsing import load_template, render_prompt

ENDPOINT_ENV = "PYRAMEM_REMOTE_ENDPOINT"
TOKEN_ENV = "PYRAMEM_REMOTE_TOKEN"


class RemoteTextModel:
    """POSTs prompts to a single endpoint with retry and timeout budgets.

    Total attempts per call = max_retries + 1.  In-flight requests are
    bounded by a shared semaphore so adapter fan-out cannot overwhelm the
    gateway.
    """

    def __init__(self, config: AdapterConfig, *, max_in_flight: int = 8,
                 transport: httpx.BaseTransport | None = None):
        endpoint = config.endpoint or os.environ.get(ENDPOINT_ENV)
        if not endpoint:
            raise ValueError("remote adapter requires an endpoint "
                             f"(config or ${ENDPOINT_ENV})")
        self.endpoint = endpoint
        self.timeout = config.timeout
        self.max_retries = config.max_retries
        self._gate = threading.Semaphore(max_in_flight)
        headers = {}
        token = os.environ.get(TOKEN_ENV)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._client = httpx.Client(timeout=config.timeout, headers=headers,
                                    transport=transport)

    def complete(self, prompt: str, images: list[str] | None = None) -> str:
        payload: dict = {"prompt": prompt}
        if images:
            payload["images"] = list(images)
        last_error: Exception | None = None
        for _ in range(self.max_retries + 1):
            try:
                response = self._client.post(self.endpoint, json=payload)
                response.raise_for_status()
                body = response.json()
                return str(body["text"])
            except (httpx.HTTPError, KeyError, json.JSONDecodeError) as exc:
                last_error = exc
        raise AdapterFailure(
            f"remote model at {self.endpoint} failed after "
            f"{self.max_retries + 1} attempts: {last_error}")

    def close(self) -> None:
        self._client.close()


def _profiles_json(profiles: dict[str, str]) -> str:
    return json.dumps(profiles, ensure_ascii=False, indent=2)


class RemoteReasonModel:
    """Answer/sufficiency model over the multiple-choice or open template."""

    def __init__(self, model: RemoteTextModel):
        self.model = model
        self._mc = load_template("answer_multiple_choice")
        self._open = load_template("answer_open")

    def assess(self, request: AssessmentRequest) -> str:
        passages = passages_to_prompt_json(request.passages)
        if request.options is not None:
            prompt = render_prompt(self._mc, {
                "question": request.question,
                "context_summary": request.global_summary,
                "options": json.dumps(list(request.options), ensure_ascii=False),
                "passages": passages,
            })
        else:
            prompt = render_prompt(self._open, {
                "question": request.question,
                "context_summary": request.global_summary,
                "passages": passages,
                "character_profiles": _profiles_json(request.profiles),
            })
        images = [kf.uri for kf in request.keyframes]
        return self.model.complete(prompt, images=images or None)


class RemotePruner:
    """Node-selection model over the numbered-passage template."""

    def __init__(self, model: RemoteTextModel, *, open_ended: bool = False):
        self.model = model
        self.open_ended = open_ended
        self._mc = load_template("node_selection_multiple_choice")
        self._open = load_template("node_selection_open")

    def select(self, request: PruneRequest) -> str:
        slots = {
            "question": request.question,
            "context_summary": request.global_summary,
            "passages": passages_to_prompt_json(request.passages),
        }
        if self.open_ended:
            slots["character_profiles"] = _profiles_json(request.profiles)
            return self.model.complete(render_prompt(self._open, slots))
        return self.model.complete(render_prompt(self._mc, slots))


class RemoteLinkJudge:
    """Relational link judge over the link-generation template."""

    def __init__(self, model: RemoteTextModel):
        self.model = model
        self._template = load_template("link_generation")

    def judge(self, query_fact: dict, candidates: list[dict]) -> str:
        prompt = render_prompt(self._template, {
            "query_fact_json": json.dumps(query_fact, ensure_ascii=False, indent=2),
            "facts_list_json": json.dumps(candidates, ensure_ascii=False, indent=2),
        })
        return self.model.complete(prompt)


class RemoteGlobalUpdater:
    def __init__(self, model: RemoteTextModel):
        self.model = model

    def update(self, previous_summary: str, clip_summary: str) -> str:
        prompt = ("Merge the new segment summary into the running video summary.\n"
                  "Keep it concise and chronological. Output the merged summary only.\n\n"
                  f"Running summary:\n{previous_summary}\n\n"
                  f"New segment summary:\n{clip_summary}\n")
        return self.model.complete(prompt)


class RemoteProfiler:
    def __init__(self, model: RemoteTextModel):
        self.model = model

    def merge(self, previous_profile: str, new_facts: list[str]) -> str:
        prompt = ("Update the character profile with the new observations.\n"
                  "Output the updated profile only.\n\n"
                  f"Current profile:\n{previous_profile}\n\n"
                  "New observations:\n" + "\n".join(f"- {f}" for f in new_facts) + "\n")
        return self.model.complete(prompt)


class RemoteExtractor:
    """Clip extractor backed by a remote model.

    Sends the clip's events (or raw text) plus media refs; expects a JSON
    object ``{"facts": [{"text", "timestamp"?, "scene"?, "asr"?,
    "name_mentions"?}], "clip_summary": str, "clip_scene"?: str}``.
    Timestamps are clamped into the clip span; a malformed response raises,
    which the ingest pipeline reports as a skipped clip.
    """

    def __init__(self, model: RemoteTextModel):
        self.model = model

    def extract(self, obs):
        from ..ingest import ExtractionResult
        from ..types import FactNode, TimeSpan

        if isinstance(obs.raw_payload, str):
            payload = obs.raw_payload
        else:
            payload = json.dumps([ev.to_dict() for ev in obs.raw_payload],
                                 ensure_ascii=False)
        prompt = ("Extract fine-grained facts and a clip summary from the "
                  "following segment events.\n"
                  "Respond with JSON only: {\"facts\": [{\"text\": str, "
                  "\"timestamp\": seconds, \"scene\": str, "
                  "\"name_mentions\": [str]}], "
                  "\"clip_summary\": str, \"clip_scene\": str}\n\n"
                  f"Segment [{obs.span.start}, {obs.span.end}] events:\n{payload}\n")
        images = [kf.uri for kf in obs.media_refs]
        doc = json.loads(self.model.complete(prompt, images=images or None))
        facts = []
        for item in doc["facts"]:
            t = float(item.get("timestamp", obs.span.start))
            t = min(max(t, obs.span.start), obs.span.end)
            facts.append(FactNode(
                id="", clip_id="", span=TimeSpan(t, t), text=str(item["text"]),
                scene=str(item.get("scene", "")), asr=str(item.get("asr", "")),
                name_mentions=[str(n) for n in item.get("name_mentions", [])]))
        return ExtractionResult(facts=facts,
                                clip_summary=str(doc["clip_summary"]),
                                clip_scene=str(doc.get("clip_scene", "")))
