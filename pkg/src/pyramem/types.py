"""Core domain types for the three-level memory graph and its snapshot schema.

The graph has exactly three levels: fact nodes (fine-grained episodic
observations), clip nodes (fixed-window summaries that own facts), and a
single global node (evolving whole-stream summary).  Nodes are connected by
typed links; ``validate_graph`` checks every structural invariant and the
snapshot helpers define the one-JSON-document persistence format.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

NodeId = str
PersonId = str

# The single global node has a fixed, well-known id.
GLOBAL_NODE_ID = "g"

LINK_KINDS = ("relational", "hier-up", "hier-down", "cross-clip")
KEYFRAME_ENCODINGS = ("external-file", "inline-base64")

# Weight used when a link judge omits one: neutral midpoint of [0, 1].
DEFAULT_LINK_WEIGHT = 0.5


class SnapshotError(ValueError):
    """Raised when a snapshot document cannot be parsed or decoded."""


def parse_timestamp(value) -> float:
    """Accept plain seconds or "MM:SS" / "HH:MM:SS" strings; return seconds."""
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        parts = value.split(":")
        if not all(p.strip() for p in parts):
            raise ValueError(f"bad timestamp {value!r}")
        try:
            nums = [float(p) for p in parts]
        except ValueError:
            raise ValueError(f"bad timestamp {value!r}") from None
        seconds = 0.0
        for n in nums:
            seconds = seconds * 60.0 + n
        return seconds
    raise ValueError(f"bad timestamp {value!r}")


@dataclass(frozen=True)
class TimeSpan:
    """Half-open-ish span in seconds from stream start; 0 <= start <= end."""

    start: float
    end: float

    def __post_init__(self):
        # Canonical float form so snapshots serialize identically no matter
        # how the span was constructed.
        object.__setattr__(self, "start", float(self.start))
        object.__setattr__(self, "end", float(self.end))
        if not (0.0 <= self.start <= self.end):
            raise ValueError(f"invalid span [{self.start}, {self.end}]")

    def contains(self, other: "TimeSpan") -> bool:
        return self.start <= other.start and other.end <= self.end

    def contains_time(self, t: float) -> bool:
        return self.start <= t <= self.end

    def to_dict(self) -> dict:
        return {"start": self.start, "end": self.end}

    @classmethod
    def from_dict(cls, d: dict) -> "TimeSpan":
        return cls(start=float(d["start"]), end=float(d["end"]))


@dataclass(frozen=True)
class KeyframeRef:
    """Pointer to one visual evidence frame; the engine never decodes media."""

    timestamp: float
    uri: str
    encoding: str = "external-file"

    def __post_init__(self):
        object.__setattr__(self, "timestamp", float(self.timestamp))
        if self.encoding not in KEYFRAME_ENCODINGS:
            raise ValueError(f"unknown keyframe encoding {self.encoding!r}")

    def to_dict(self) -> dict:
        return {"timestamp": self.timestamp, "uri": self.uri, "encoding": self.encoding}

    @classmethod
    def from_dict(cls, d: dict) -> "KeyframeRef":
        return cls(timestamp=float(d["timestamp"]), uri=str(d["uri"]),
                   encoding=str(d.get("encoding", "external-file")))


@dataclass(frozen=True)
class Link:
    """Directed edge to another node.

    kind routing: relational is fact->fact, hier-up is fact->clip or
    clip->global, hier-down the reverse, cross-clip is clip->clip.
    """

    target: NodeId
    description: str = ""
    weight: float = DEFAULT_LINK_WEIGHT
    kind: str = "relational"

    def __post_init__(self):
        object.__setattr__(self, "weight", float(self.weight))
        if self.kind not in LINK_KINDS:
            raise ValueError(f"unknown link kind {self.kind!r}")
        if not (0.0 <= self.weight <= 1.0):
            raise ValueError(f"link weight {self.weight} outside [0, 1]")

    def to_dict(self) -> dict:
        return {"target": self.target, "description": self.description,
                "weight": self.weight, "kind": self.kind}

    @classmethod
    def from_dict(cls, d: dict) -> "Link":
        return cls(target=str(d["target"]), description=str(d.get("description", "")),
                   weight=float(d.get("weight", DEFAULT_LINK_WEIGHT)),
                   kind=str(d.get("kind", "relational")))


@dataclass
class FactNode:
    """Fine-grained episodic observation extracted from one clip."""

    id: NodeId
    clip_id: NodeId
    span: TimeSpan
    text: str
    scene: str = ""
    asr: str = ""
    asr_periods: list[TimeSpan] = field(default_factory=list)
    name_mentions: list[str] = field(default_factory=list)
    keyframes: list[KeyframeRef] = field(default_factory=list)
    links: list[Link] = field(default_factory=list)
    character_text: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "clip_id": self.clip_id,
            "span": self.span.to_dict(),
            "text": self.text,
            "scene": self.scene,
            "asr": self.asr,
            "asr_periods": [p.to_dict() for p in self.asr_periods],
            "name_mentions": list(self.name_mentions),
            "keyframes": [k.to_dict() for k in self.keyframes],
            "links": [l.to_dict() for l in self.links],
            "character_text": self.character_text,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FactNode":
        return cls(
            id=str(d["id"]),
            clip_id=str(d["clip_id"]),
            span=TimeSpan.from_dict(d["span"]),
            text=str(d["text"]),
            scene=str(d.get("scene", "")),
            asr=str(d.get("asr", "")),
            asr_periods=[TimeSpan.from_dict(p) for p in d.get("asr_periods", [])],
            name_mentions=[str(n) for n in d.get("name_mentions", [])],
            keyframes=[KeyframeRef.from_dict(k) for k in d.get("keyframes", [])],
            links=[Link.from_dict(l) for l in d.get("links", [])],
            character_text=d.get("character_text"),
        )


@dataclass
class ClipNode:
    """Summary node owning the facts of one fixed-length temporal segment."""

    id: NodeId
    span: TimeSpan
    summary: str
    scene: str = ""
    fact_ids: list[NodeId] = field(default_factory=list)
    cross_clip_links: list[Link] = field(default_factory=list)
    character_summary: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "span": self.span.to_dict(),
            "summary": self.summary,
            "scene": self.scene,
            "fact_ids": list(self.fact_ids),
            "cross_clip_links": [l.to_dict() for l in self.cross_clip_links],
            "character_summary": self.character_summary,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClipNode":
        return cls(
            id=str(d["id"]),
            span=TimeSpan.from_dict(d["span"]),
            summary=str(d["summary"]),
            scene=str(d.get("scene", "")),
            fact_ids=[str(f) for f in d.get("fact_ids", [])],
            cross_clip_links=[Link.from_dict(l) for l in d.get("cross_clip_links", [])],
            character_summary=d.get("character_summary"),
        )


@dataclass
class GlobalNode:
    """Single evolving whole-stream summary; version bumps once per update."""

    summary: str = ""
    version: int = 0
    clips_integrated: int = 0

    def to_dict(self) -> dict:
        return {"summary": self.summary, "version": self.version,
                "clips_integrated": self.clips_integrated}

    @classmethod
    def from_dict(cls, d: dict) -> "GlobalNode":
        return cls(summary=str(d.get("summary", "")), version=int(d.get("version", 0)),
                   clips_integrated=int(d.get("clips_integrated", 0)))


@dataclass
class PersonEntity:
    """Identity record built by incremental face-centroid merging."""

    person_id: PersonId
    face_centroid: list[float]
    observation_count: int
    voice_refs: list[str] = field(default_factory=list)
    profile: str = ""
    evidence: list[NodeId] = field(default_factory=list)

    def __post_init__(self):
        self.face_centroid = [float(x) for x in self.face_centroid]

    def to_dict(self) -> dict:
        return {
            "person_id": self.person_id,
            "face_centroid": list(self.face_centroid),
            "observation_count": self.observation_count,
            "voice_refs": list(self.voice_refs),
            "profile": self.profile,
            "evidence": list(self.evidence),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PersonEntity":
        return cls(
            person_id=str(d["person_id"]),
            face_centroid=[float(x) for x in d["face_centroid"]],
            observation_count=int(d["observation_count"]),
            voice_refs=[str(v) for v in d.get("voice_refs", [])],
            profile=str(d.get("profile", "")),
            evidence=[str(e) for e in d.get("evidence", [])],
        )


@dataclass(frozen=True)
class Verdict:
    """Sufficiency outcome of one assessment turn: a final answer or a
    request to expand the evidence context."""

    kind: str  # "answer" | "expand"
    text: str | None = None

    def __post_init__(self):
        if self.kind not in ("answer", "expand"):
            raise ValueError(f"unknown verdict kind {self.kind!r}")
        if self.kind == "answer" and not (self.text and self.text.strip()):
            raise ValueError("answer verdict requires non-empty text")
        if self.kind == "expand" and self.text is not None:
            raise ValueError("expand verdict carries no payload")

    @classmethod
    def answer(cls, text: str) -> "Verdict":
        return cls(kind="answer", text=text)

    @classmethod
    def expand(cls) -> "Verdict":
        return cls(kind="expand")

    @property
    def is_answer(self) -> bool:
        return self.kind == "answer"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "text": self.text}


@dataclass
class MemoryState:
    """The full store content: one global node plus clip/fact/person maps."""

    global_node: GlobalNode = field(default_factory=GlobalNode)
    clips: dict[NodeId, ClipNode] = field(default_factory=dict)
    facts: dict[NodeId, FactNode] = field(default_factory=dict)
    persons: dict[PersonId, PersonEntity] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Snapshot format: one JSON document with sections global / clips / facts /
# persons, field names exactly as the dataclass fields above.
# ---------------------------------------------------------------------------

def state_to_snapshot_dict(state: MemoryState) -> dict:
    return {
        "global": state.global_node.to_dict(),
        "clips": [c.to_dict() for c in state.clips.values()],
        "facts": [f.to_dict() for f in state.facts.values()],
        "persons": [p.to_dict() for p in state.persons.values()],
    }


def state_from_snapshot_dict(doc: dict) -> MemoryState:
    if not isinstance(doc, dict):
        raise SnapshotError("snapshot root must be a JSON object")
    for section in ("global", "clips", "facts", "persons"):
        if section not in doc:
            raise SnapshotError(f"snapshot missing field '{section}'")
    try:
        global_node = GlobalNode.from_dict(doc["global"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SnapshotError(f"bad field 'global': {exc}") from exc
    state = MemoryState(global_node=global_node)
    for section, decoder, target, key in (
        ("clips", ClipNode.from_dict, state.clips, "id"),
        ("facts", FactNode.from_dict, state.facts, "id"),
        ("persons", PersonEntity.from_dict, state.persons, "person_id"),
    ):
        for i, item in enumerate(doc[section]):
            try:
                obj = decoder(item)
            except (KeyError, TypeError, ValueError) as exc:
                raise SnapshotError(f"bad field '{section}[{i}]': {exc}") from exc
            ident = getattr(obj, "id", None) or getattr(obj, "person_id")
            if ident in target:
                raise SnapshotError(f"bad field '{section}[{i}]': duplicate id {ident!r}")
            target[ident] = obj
    return state


def dumps_snapshot(state: MemoryState) -> str:
    """Canonical serialization: fixed key order, 2-space indent, UTF-8 text.

    The same state always produces byte-identical output.
    """
    return json.dumps(state_to_snapshot_dict(state), ensure_ascii=False, indent=2)


def loads_snapshot(text: str) -> MemoryState:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SnapshotError(
            f"malformed snapshot at byte offset {exc.pos}: {exc.msg}") from exc
    return state_from_snapshot_dict(doc)


# ---------------------------------------------------------------------------
# Graph validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    """One invariant violation found in a store snapshot."""

    code: str
    node: str
    detail: str = ""

    def __str__(self):
        tail = f": {self.detail}" if self.detail else ""
        return f"{self.code}({self.node}){tail}"


def _check_link(owner_id: str, owner_level: str, link: Link,
                state: MemoryState, out: list[Violation]) -> None:
    if not (0.0 <= link.weight <= 1.0):
        out.append(Violation("weight-out-of-range", owner_id,
                             f"link to {link.target} has weight {link.weight}"))
    target_level = None
    if link.target in state.facts:
        target_level = "fact"
    elif link.target in state.clips:
        target_level = "clip"
    elif link.target == GLOBAL_NODE_ID:
        target_level = "global"
    if target_level is None:
        out.append(Violation("dangling-link", link.target,
                             f"referenced from {owner_id}"))
        return
    ok_routes = {
        "relational": {("fact", "fact")},
        "cross-clip": {("clip", "clip")},
        "hier-up": {("fact", "clip"), ("clip", "global")},
        "hier-down": {("clip", "fact"), ("global", "clip")},
    }
    if (owner_level, target_level) not in ok_routes[link.kind]:
        out.append(Violation("bad-link-kind", owner_id,
                             f"{link.kind} link {owner_level}->{target_level} "
                             f"(target {link.target})"))
    elif link.kind == "hier-up" and owner_level == "fact":
        fact = state.facts[owner_id]
        if link.target != fact.clip_id:
            out.append(Violation("bad-link-kind", owner_id,
                                 f"hier-up points to {link.target}, parent is {fact.clip_id}"))


def validate_graph(state: MemoryState) -> list[Violation]:
    """Return every invariant violation in the store; empty list means valid.

    Checked: dangling link targets, link weight range, link kind routing,
    span containment (fact within clip, asr periods and keyframes within
    fact), fact/clip membership consistency, non-empty fact text, non-empty
    finalized clips, and person centroid/count sanity.
    """
    out: list[Violation] = []
    for fact in state.facts.values():
        if not fact.text:
            out.append(Violation("empty-fact-text", fact.id))
        parent = state.clips.get(fact.clip_id)
        if parent is None:
            out.append(Violation("fact-missing-parent", fact.id,
                                 f"clip {fact.clip_id} not found"))
        else:
            if not parent.span.contains(fact.span):
                out.append(Violation("span-outside-clip", fact.id,
                                     f"fact span [{fact.span.start}, {fact.span.end}] not in "
                                     f"clip span [{parent.span.start}, {parent.span.end}]"))
            if fact.id not in parent.fact_ids:
                out.append(Violation("clip-fact-mismatch", fact.id,
                                     f"not listed in clip {parent.id}"))
        for period in fact.asr_periods:
            if not fact.span.contains(period):
                out.append(Violation("asr-period-outside-span", fact.id,
                                     f"[{period.start}, {period.end}]"))
        for kf in fact.keyframes:
            if not fact.span.contains_time(kf.timestamp):
                out.append(Violation("keyframe-outside-span", fact.id,
                                     f"timestamp {kf.timestamp}"))
        for link in fact.links:
            _check_link(fact.id, "fact", link, state, out)
    for clip in state.clips.values():
        if not clip.fact_ids:
            out.append(Violation("empty-clip", clip.id))
        for fid in clip.fact_ids:
            member = state.facts.get(fid)
            if member is None:
                out.append(Violation("dangling-link", fid,
                                     f"listed as fact of clip {clip.id}"))
            elif member.clip_id != clip.id:
                out.append(Violation("clip-fact-mismatch", fid,
                                     f"listed in {clip.id} but belongs to {member.clip_id}"))
        for link in clip.cross_clip_links:
            if link.kind != "cross-clip":
                out.append(Violation("bad-link-kind", clip.id,
                                     f"{link.kind} link stored as cross-clip"))
            _check_link(clip.id, "clip", link, state, out)
    for person in state.persons.values():
        norm = math.sqrt(sum(x * x for x in person.face_centroid))
        if abs(norm - 1.0) > 1e-6:
            out.append(Violation("person-centroid-not-unit", person.person_id,
                                 f"norm {norm:.9f}"))
        if person.observation_count < 1:
            out.append(Violation("bad-observation-count", person.person_id,
                                 str(person.observation_count)))
        for ref in person.evidence:
            if ref not in state.facts and ref not in state.clips:
                out.append(Violation("dangling-link", ref,
                                     f"evidence of {person.person_id}"))
    if state.global_node.version < 0 or state.global_node.clips_integrated < 0:
        out.append(Violation("bad-global-counters", GLOBAL_NODE_ID,
                             f"version={state.global_node.version} "
                             f"clips_integrated={state.global_node.clips_integrated}"))
    return out
