"""Three-level memory graph store.

Owns insertion of fact/clip nodes, the single global node, hierarchical
link maintenance, neighbor queries, and persistence (snapshot plus optional
line-delimited append log).  Hierarchical structure is materialized both
ways: facts carry an explicit hier-up link to their clip, while the
downward direction lives in ``ClipNode.fact_ids`` and the clip->global pair
is implied by the single global node; ``neighbors`` exposes all of them as
links.  One writer at a time per store; readers share a snapshot-consistent
view via the read/write lock.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from contextlib import contextmanager
from pathlib import Path

from .index import VectorIndex
from .types import (
    GLOBAL_NODE_ID,
    ClipNode,
    FactNode,
    GlobalNode,
    Link,
    MemoryState,
    NodeId,
    PersonEntity,
    dumps_snapshot,
    loads_snapshot,
)

logger = logging.getLogger(__name__)

LEVEL_FACT = "fact"
LEVEL_CLIP = "clip"
LEVEL_GLOBAL = "global"


class StoreError(Exception):
    pass


class DuplicateIdError(StoreError):
    pass


class SpanViolation(StoreError):
    pass


class NodeNotFound(StoreError, KeyError):
    pass


class GlobalUpdateError(StoreError):
    """The global updater adapter failed; the global node was left unchanged."""

    def __init__(self, message: str, retry_hint: str = "retry the update"):
        super().__init__(f"{message} ({retry_hint})")
        self.retry_hint = retry_hint


class _ReadWriteLock:
    """Many readers or one writer; writers wait for readers to drain."""

    def __init__(self):
        self._cond = threading.Condition()
        self._readers = 0
        self._writing = False

    @contextmanager
    def reading(self):
        with self._cond:
            while self._writing:
                self._cond.wait()
            self._readers += 1
        try:
            yield
        finally:
            with self._cond:
                self._readers -= 1
                if self._readers == 0:
                    self._cond.notify_all()

    @contextmanager
    def writing(self):
        with self._cond:
            while self._writing or self._readers:
                self._cond.wait()
            self._writing = True
        try:
            yield
        finally:
            with self._cond:
                self._writing = False
                self._cond.notify_all()


class MemoryStore:
    """Append-only three-level memory graph with an embedded vector index.

    Fact texts and clip summaries share one index, distinguished by a level
    tag, so seed retrieval can filter to facts while the socratic baseline
    retrieves clips from the same store.
    """

    def __init__(self, embedder, *, log_path: str | Path | None = None):
        self.embedder = embedder
        self.state = MemoryState()
        self.index = VectorIndex(embedder.dim)
        self._fact_order: dict[NodeId, int] = {}
        self._incoming_relational: dict[NodeId, list[NodeId]] = {}
        self._incoming_cross: dict[NodeId, list[NodeId]] = {}
        self._cross_pairs: set[tuple[NodeId, NodeId]] = set()
        self._next_fact = 1
        self._next_clip = 1
        self._next_person = 1
        self._log_path = Path(log_path) if log_path else None
        self._lock = _ReadWriteLock()

    # -- id allocation ----------------------------------------------------

    def new_fact_id(self) -> NodeId:
        nid = f"f-{self._next_fact}"
        self._next_fact += 1
        return nid

    def new_clip_id(self) -> NodeId:
        nid = f"c-{self._next_clip}"
        self._next_clip += 1
        return nid

    def new_person_id(self) -> str:
        pid = f"p-{self._next_person}"
        self._next_person += 1
        return pid

    # -- locking ----------------------------------------------------------

    def reading(self):
        return self._lock.reading()

    def writing(self):
        return self._lock.writing()

    # -- event log ----------------------------------------------------------

    def _log_event(self, event: str, payload: dict) -> None:
        if self._log_path is None:
            return
        record = {"event": event}
        record.update(payload)
        with open(self._log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")

    # -- level helpers ------------------------------------------------------

    def level_of(self, node_id: NodeId) -> str:
        if node_id in self.state.facts:
            return LEVEL_FACT
        if node_id in self.state.clips:
            return LEVEL_CLIP
        if node_id == GLOBAL_NODE_ID:
            return LEVEL_GLOBAL
        raise NodeNotFound(node_id)

    def has_node(self, node_id: NodeId) -> bool:
        return (node_id in self.state.facts or node_id in self.state.clips
                or node_id == GLOBAL_NODE_ID)

    def fact_order(self, fact_id: NodeId) -> int:
        return self._fact_order[fact_id]

    def facts_ingested_before(self, fact_id: NodeId) -> set[NodeId]:
        """Ids of facts that entered the store strictly earlier."""
        cutoff = self._fact_order[fact_id]
        return {fid for fid, order in self._fact_order.items() if order < cutoff}

    # -- mutations ----------------------------------------------------------

    def add_clip(self, clip: ClipNode, facts: list[FactNode]) -> None:
        """Insert a finalized clip and its facts atomically.

        Validates before mutating: fresh ids, matching clip_id on every
        fact, and fact spans contained in the clip span.  On success the
        facts carry a hier-up link to the clip, the clip lists them in
        order, and fact texts plus the clip summary are embedded into the
        index with level tags.
        """
        if self.has_node(clip.id):
            raise DuplicateIdError(f"clip id {clip.id} already exists")
        if not facts:
            raise StoreError(f"clip {clip.id} has no facts")
        seen: set[str] = set()
        for fact in facts:
            if self.has_node(fact.id) or fact.id in seen:
                raise DuplicateIdError(f"fact id {fact.id} already exists")
            seen.add(fact.id)
            if fact.clip_id != clip.id:
                raise StoreError(
                    f"fact {fact.id} has clip_id {fact.clip_id}, expected {clip.id}")
            if not clip.span.contains(fact.span):
                raise SpanViolation(
                    f"fact {fact.id} span [{fact.span.start}, {fact.span.end}] exceeds "
                    f"clip span [{clip.span.start}, {clip.span.end}]")
            if not fact.text:
                raise StoreError(f"fact {fact.id} has empty text")
        embeddings = [(fact.id, self.embedder.embed(fact.text)) for fact in facts]
        clip_vec = self.embedder.embed(clip.summary) if clip.summary else None

        clip.fact_ids = [fact.id for fact in facts]
        for fact in facts:
            fact.links.append(Link(target=clip.id, description=f"within {clip.id}",
                                   weight=1.0, kind="hier-up"))
            self.state.facts[fact.id] = fact
            self._fact_order[fact.id] = len(self._fact_order)
        self.state.clips[clip.id] = clip
        for fact_id, vec in embeddings:
            self.index.upsert(fact_id, vec, tag=LEVEL_FACT)
        if clip_vec is not None:
            self.index.upsert(clip.id, clip_vec, tag=LEVEL_CLIP)
        self._log_event("add_clip", {"clip_id": clip.id, "fact_ids": clip.fact_ids})

    def attach_links(self, fact_id: NodeId, links: list[Link]) -> None:
        """Append relational links to a fact's outgoing set."""
        fact = self.state.facts.get(fact_id)
        if fact is None:
            raise NodeNotFound(fact_id)
        for link in links:
            if link.kind != "relational":
                raise StoreError(f"attach_links only accepts relational links, got {link.kind}")
            if link.target not in self.state.facts:
                raise NodeNotFound(link.target)
            fact.links.append(link)
            self._incoming_relational.setdefault(link.target, []).append(fact_id)
        if links:
            self._log_event("attach_links", {
                "level": "fact", "source": fact_id,
                "links": [l.to_dict() for l in links]})

    def add_cross_clip_link(self, source_clip_id: NodeId, link: Link) -> bool:
        """Attach one cross-clip link, deduplicated on the (source, target)
        pair; returns True when a new link was created."""
        clip = self.state.clips.get(source_clip_id)
        if clip is None:
            raise NodeNotFound(source_clip_id)
        if link.target not in self.state.clips:
            raise NodeNotFound(link.target)
        if link.kind != "cross-clip":
            raise StoreError(f"expected cross-clip link, got {link.kind}")
        pair = (source_clip_id, link.target)
        if pair in self._cross_pairs:
            return False
        clip.cross_clip_links.append(link)
        self._cross_pairs.add(pair)
        self._incoming_cross.setdefault(link.target, []).append(source_clip_id)
        self._log_event("attach_links", {
            "level": "clip", "source": source_clip_id, "links": [link.to_dict()]})
        return True

    def update_global(self, clip_summary: str, updater) -> "GlobalNode":
        """Fold one clip summary into the global node via the updater.

        Atomic: if the adapter raises, the global node is unchanged and the
        failure surfaces with a retry hint.
        """
        g = self.state.global_node
        try:
            merged = updater.update(g.summary, clip_summary)
        except Exception as exc:
            raise GlobalUpdateError(f"global updater failed: {exc}") from exc
        return self.commit_global(str(merged))

    def commit_global(self, summary: str) -> "GlobalNode":
        """Apply an already-computed global summary; bumps both counters."""
        g = self.state.global_node
        g.summary = summary
        g.version += 1
        g.clips_integrated += 1
        self._log_event("update_global", {
            "version": g.version, "clips_integrated": g.clips_integrated})
        return g

    def upsert_person(self, person: PersonEntity) -> None:
        self.state.persons[person.person_id] = person
        self._log_event("upsert_person", {
            "person_id": person.person_id,
            "observation_count": person.observation_count})

    # -- queries --------------------------------------------------------------

    def neighbors(self, node_id: NodeId, kinds: set[str]) -> list[tuple[NodeId, Link]]:
        """Outgoing links of the requested kinds in deterministic
        (insertion) order.  Hier-down and clip->global links are synthesized
        from structure; everything else is stored explicitly."""
        level = self.level_of(node_id)  # raises NodeNotFound
        out: list[tuple[NodeId, Link]] = []
        if level == LEVEL_FACT:
            fact = self.state.facts[node_id]
            for link in fact.links:
                if link.kind in kinds:
                    out.append((link.target, link))
        elif level == LEVEL_CLIP:
            clip = self.state.clips[node_id]
            if "hier-up" in kinds:
                link = Link(target=GLOBAL_NODE_ID, description="part of stream",
                            weight=1.0, kind="hier-up")
                out.append((GLOBAL_NODE_ID, link))
            if "hier-down" in kinds:
                for fid in clip.fact_ids:
                    out.append((fid, Link(target=fid, description=f"contains {fid}",
                                          weight=1.0, kind="hier-down")))
            if "cross-clip" in kinds:
                for link in clip.cross_clip_links:
                    out.append((link.target, link))
        else:
            if "hier-down" in kinds:
                for cid in self.state.clips:
                    out.append((cid, Link(target=cid, description=f"contains {cid}",
                                          weight=1.0, kind="hier-down")))
        return out

    def incoming_relational(self, fact_id: NodeId) -> list[NodeId]:
        """Facts linking to fact_id, in ingestion order (canonical across
        save/load, which rebuilds the reverse map from the snapshot)."""
        sources = set(self._incoming_relational.get(fact_id, ()))
        return sorted(sources, key=self._fact_order.__getitem__)

    def incoming_cross_clip(self, clip_id: NodeId) -> list[NodeId]:
        clip_order = {cid: i for i, cid in enumerate(self.state.clips)}
        sources = set(self._incoming_cross.get(clip_id, ()))
        return sorted(sources, key=clip_order.__getitem__)

    def stats(self) -> dict:
        """Counts per level plus a per-kind link tally and a relational
        out-degree histogram (degree -> number of facts)."""
        relational = 0
        histogram: dict[str, int] = {}
        for fact in self.state.facts.values():
            degree = sum(1 for l in fact.links if l.kind == "relational")
            relational += degree
            histogram[str(degree)] = histogram.get(str(degree), 0) + 1
        cross = sum(len(c.cross_clip_links) for c in self.state.clips.values())
        n_facts = len(self.state.facts)
        n_clips = len(self.state.clips)
        return {
            "facts": n_facts,
            "clips": n_clips,
            "persons": len(self.state.persons),
            "global_version": self.state.global_node.version,
            "clips_integrated": self.state.global_node.clips_integrated,
            "links": {
                "relational": relational,
                "cross-clip": cross,
                "hier-up": n_facts + n_clips,
                "hier-down": n_facts + n_clips,
            },
            "relational_degree_histogram": histogram,
        }

    # -- persistence ------------------------------------------------------------

    def snapshot_text(self) -> str:
        return dumps_snapshot(self.state)

    def save(self, path: str | Path) -> None:
        """Write the snapshot atomically (temp file + rename)."""
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(self.snapshot_text(), encoding="utf-8")
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str | Path, embedder, *,
             log_path: str | Path | None = None) -> "MemoryStore":
        """Load a snapshot; fails atomically (no store object on error).

        The vector index is rebuilt by re-embedding fact texts and clip
        summaries: the embedder contract is deterministic, so the rebuilt
        index is identical to the one at save time.
        """
        text = Path(path).read_text(encoding="utf-8")
        state = loads_snapshot(text)
        store = cls(embedder, log_path=log_path)
        store.state = state
        for order, (fid, fact) in enumerate(state.facts.items()):
            store._fact_order[fid] = order
            store.index.upsert(fid, embedder.embed(fact.text), tag=LEVEL_FACT)
            for link in fact.links:
                if link.kind == "relational":
                    store._incoming_relational.setdefault(link.target, []).append(fid)
        for cid, clip in state.clips.items():
            if clip.summary:
                store.index.upsert(cid, embedder.embed(clip.summary), tag=LEVEL_CLIP)
            for link in clip.cross_clip_links:
                store._cross_pairs.add((cid, link.target))
                store._incoming_cross.setdefault(link.target, []).append(cid)
        store._next_fact = _next_counter(state.facts, "f-")
        store._next_clip = _next_counter(state.clips, "c-")
        store._next_person = _next_counter(state.persons, "p-")
        return store


def _next_counter(mapping: dict, prefix: str) -> int:
    """Ids are never reused: resume counters past the highest suffix seen."""
    highest = 0
    for key in mapping:
        if key.startswith(prefix):
            try:
                highest = max(highest, int(key[len(prefix):]))
            except ValueError:
                continue
    return highest + 1
