"""Online ingestion: fixed-window segmentation plus the per-clip pipeline.

Each clip runs extractor -> add_clip -> per-fact link building (with
cross-clip induction) -> identity update -> global update, strictly in
stream order.  Model-step failures after extraction degrade the clip
(no links, unchanged profiles, carried-over global summary) instead of
failing ingestion; store-level violations abort the clip atomically.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

from .identity import FaceObservation, IdentityBank
from .links import DEFAULT_K_LINK, LinkBuilder
from .store import GlobalUpdateError, MemoryStore
from .types import ClipNode, FactNode, KeyframeRef, TimeSpan, parse_timestamp

logger = logging.getLogger(__name__)

DEFAULT_CLIP_LEN = 30.0


class StreamOrderError(ValueError):
    """Events arrived out of time order."""


@dataclass(frozen=True)
class StreamEvent:
    """One timed input event: {t, text, media?} plus optional extraction
    hints (names, scene, asr) consumed by scripted extractors."""

    t: float
    text: str
    media: str | None = None
    names: tuple[str, ...] = ()
    scene: str = ""
    asr: str = ""

    @classmethod
    def from_dict(cls, d: dict) -> "StreamEvent":
        return cls(
            t=parse_timestamp(d["t"]),
            text=str(d.get("text", "")),
            media=d.get("media"),
            names=tuple(str(n) for n in d.get("names", [])),
            scene=str(d.get("scene", "")),
            asr=str(d.get("asr", "")),
        )

    def to_dict(self) -> dict:
        out: dict = {"t": self.t, "text": self.text}
        if self.media:
            out["media"] = self.media
        if self.names:
            out["names"] = list(self.names)
        if self.scene:
            out["scene"] = self.scene
        if self.asr:
            out["asr"] = self.asr
        return out


@dataclass
class ClipObservation:
    """Everything the extractor may see for one clip; nothing beyond the
    clip's end is reachable from here, which enforces the online contract."""

    span: TimeSpan
    raw_payload: tuple[StreamEvent, ...] | str
    media_refs: list[KeyframeRef] = field(default_factory=list)


@dataclass
class ExtractionResult:
    """Extractor output: facts without ids plus the clip-level summary."""

    facts: list[FactNode]
    clip_summary: str
    clip_scene: str = ""


@dataclass
class IngestReport:
    clips: int = 0
    facts: int = 0
    links: int = 0
    cross_clip_links: int = 0
    persons_created: int = 0
    persons_updated: int = 0
    global_version: int = 0
    warnings: list[str] = field(default_factory=list)

    def merge(self, other: "IngestReport") -> None:
        self.clips += other.clips
        self.facts += other.facts
        self.links += other.links
        self.cross_clip_links += other.cross_clip_links
        self.persons_created += other.persons_created
        self.persons_updated += other.persons_updated
        self.global_version = other.global_version or self.global_version
        self.warnings.extend(other.warnings)

    def to_dict(self) -> dict:
        return {
            "clips": self.clips,
            "facts": self.facts,
            "links": self.links,
            "cross_clip_links": self.cross_clip_links,
            "persons_created": self.persons_created,
            "persons_updated": self.persons_updated,
            "global_version": self.global_version,
            "warnings": list(self.warnings),
        }


def read_events(lines) -> list[StreamEvent]:
    """Parse line-delimited JSON events; blank lines are skipped."""
    events = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            events.append(StreamEvent.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise ValueError(f"bad event on line {lineno}: {exc}") from exc
    return events


def read_event_file(path: str | Path) -> list[StreamEvent]:
    with open(path, encoding="utf-8") as fh:
        return read_events(fh)


def segment(events: list[StreamEvent], clip_len: float = DEFAULT_CLIP_LEN) -> list[ClipObservation]:
    """Partition time-ordered events into half-open windows
    [k*clip_len, (k+1)*clip_len).

    Every event lands in exactly one clip.  The final clip is trimmed to
    the last event's timestamp; windows containing no events are skipped
    (there is no observation to process).  Unordered input is an error
    naming the first inversion.
    """
    if clip_len <= 0:
        raise ValueError("clip_len must be positive")
    for i in range(1, len(events)):
        if events[i].t < events[i - 1].t:
            raise StreamOrderError(
                f"event {i} at t={events[i].t} precedes event {i - 1} "
                f"at t={events[i - 1].t}")
    if events and events[0].t < 0:
        raise ValueError(f"negative event time {events[0].t}")
    windows: dict[int, list[StreamEvent]] = {}
    for ev in events:
        windows.setdefault(int(math.floor(ev.t / clip_len)), []).append(ev)
    if not windows:
        return []
    last_k = max(windows)
    stream_end = events[-1].t
    clips = []
    for k in sorted(windows):
        end = (k + 1) * clip_len if k < last_k else stream_end
        span = TimeSpan(k * clip_len, max(end, k * clip_len))
        members = tuple(windows[k])
        media = [KeyframeRef(timestamp=ev.t, uri=ev.media)
                 for ev in members if ev.media]
        clips.append(ClipObservation(span=span, raw_payload=members, media_refs=media))
    return clips


class IngestPipeline:
    """Strictly ordered per-clip ingestion over one store."""

    def __init__(self, store: MemoryStore, *, extractor, global_updater,
                 link_judge=None, profiler=None, face_embedder=None,
                 k_link: int = DEFAULT_K_LINK, theta_local: float = 0.6,
                 theta_global: float = 0.5, clip_len: float = DEFAULT_CLIP_LEN):
        self.store = store
        self.extractor = extractor
        self.global_updater = global_updater
        self.link_builder = (LinkBuilder(store, link_judge, k_link)
                             if link_judge is not None else None)
        self.profiler = profiler
        self.face_embedder = face_embedder
        self.identity_bank = None
        if face_embedder is not None:
            self.identity_bank = IdentityBank(
                face_embedder.dim, theta_local=theta_local, theta_global=theta_global,
                persons=store.state.persons, allocate_id=store.new_person_id,
                on_upsert=store.upsert_person)
        self.clip_len = clip_len
        self._last_end = 0.0

    def process_clip(self, obs: ClipObservation) -> IngestReport:
        """Ingest one clip; prior clips of this store must already be done."""
        report = IngestReport()
        if obs.span.start + 1e-9 < self._last_end:
            raise StreamOrderError(
                f"clip starting at {obs.span.start} overlaps previously "
                f"ingested stream up to {self._last_end}")
        try:
            extraction = self.extractor.extract(obs)
        except Exception as exc:
            logger.warning("extractor failed for clip at %s: %s", obs.span.start, exc)
            report.warnings.append(f"extractor failed: {exc}; clip skipped")
            return report
        if not extraction.facts:
            report.warnings.append(
                f"extractor produced no facts for clip at {obs.span.start}; clip skipped")
            return report

        with self.store.writing():
            clip_id = self.store.new_clip_id()
            clip = ClipNode(id=clip_id, span=obs.span, summary=extraction.clip_summary,
                            scene=extraction.clip_scene)
            facts = extraction.facts
            for fact in facts:
                fact.id = self.store.new_fact_id()
                fact.clip_id = clip_id
            self.store.add_clip(clip, facts)
            report.clips = 1
            report.facts = len(facts)

            if self.link_builder is not None:
                before_cross = sum(len(c.cross_clip_links)
                                   for c in self.store.state.clips.values())
                for fact in facts:
                    proposal = self.link_builder.build_for_fact(fact)
                    report.links += len(proposal.judged)
                report.cross_clip_links = sum(
                    len(c.cross_clip_links)
                    for c in self.store.state.clips.values()) - before_cross

            if self.identity_bank is not None:
                self._update_identities(facts, report)

            try:
                self.store.update_global(extraction.clip_summary, self.global_updater)
            except GlobalUpdateError as exc:
                # Keep the clip finalized: carry the previous summary forward.
                logger.warning("global update degraded for %s: %s", clip_id, exc)
                report.warnings.append(f"global update degraded: {exc}")
                self.store.commit_global(self.store.state.global_node.summary)
            report.global_version = self.store.state.global_node.version
        self._last_end = obs.span.end
        return report

    def _update_identities(self, facts: list[FactNode], report: IngestReport) -> None:
        observations = []
        for fact in facts:
            for mention in fact.name_mentions:
                observations.append(FaceObservation(
                    embedding=self.face_embedder.embed(mention),
                    evidence=fact.id, label=mention))
        if not observations:
            return
        assignments = self.identity_bank.observe_clip(observations)
        for assignment in assignments:
            if assignment.created:
                report.persons_created += 1
            else:
                report.persons_updated += 1
            evidence_ids = []
            for idx in assignment.cluster.member_indices:
                ref = observations[idx].evidence
                if ref and ref not in evidence_ids:
                    evidence_ids.append(ref)
            self._record_voice_refs(assignment.person_id, evidence_ids)
            if self.profiler is None:
                continue
            character_facts = []
            for ref in evidence_ids:
                fact = self.store.state.facts[ref]
                character_facts.append(fact.character_text or fact.text)
            try:
                self.identity_bank.update_profile(
                    assignment.person_id, character_facts, self.profiler,
                    evidence=evidence_ids)
            except Exception as exc:
                logger.warning("profiler failed for %s: %s", assignment.person_id, exc)
                report.warnings.append(
                    f"profile update failed for {assignment.person_id}: {exc}")

    def _record_voice_refs(self, person_id: str, evidence_ids: list[str]) -> None:
        """Associate speech segments of the evidencing facts with the
        person; alignment proper is the extractor's job, the bank only keeps
        the resulting references."""
        person = self.identity_bank.persons[person_id]
        for ref in evidence_ids:
            fact = self.store.state.facts[ref]
            for i, _ in enumerate(fact.asr_periods):
                voice_id = f"v-{ref}-{i}"
                if voice_id not in person.voice_refs:
                    person.voice_refs.append(voice_id)

    def ingest_events(self, events: list[StreamEvent]) -> IngestReport:
        """Segment and ingest a whole event stream, clip by clip."""
        total = IngestReport()
        for obs in segment(events, self.clip_len):
            total.merge(self.process_clip(obs))
        total.global_version = self.store.state.global_node.version
        return total
