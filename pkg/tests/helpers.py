"""Shared test oracles and synthetic-store builders.

Everything here is deliberately independent of the engine's own traversal
and ranking code: the BFS closure builds its adjacency straight from the
memory state, and random stores are constructed with an adjacency map kept
on the side so neighbor queries can be checked against ground truth.
"""

from __future__ import annotations

import random

from pyramem.adapters.scripted import HashEmbedder
from pyramem.store import MemoryStore
from pyramem.types import ClipNode, FactNode, Link, MemoryState, TimeSpan


def bfs_closure(state: MemoryState, seeds, rounds: int, *,
                undirected: bool = True, hierarchy: bool = True,
                links: bool = True) -> set[str]:
    """R-step BFS closure under the documented expansion edge rules."""
    adjacency: dict[str, set[str]] = {}

    def add(a: str, b: str) -> None:
        adjacency.setdefault(a, set()).add(b)

    for fact in state.facts.values():
        if hierarchy:
            add(fact.id, fact.clip_id)
        for link in fact.links:
            if link.kind == "relational" and links:
                add(fact.id, link.target)
                if undirected:
                    add(link.target, fact.id)
    for clip in state.clips.values():
        if hierarchy:
            for fid in clip.fact_ids:
                add(clip.id, fid)
        for link in clip.cross_clip_links:
            if links:
                add(clip.id, link.target)
                if undirected:
                    add(link.target, clip.id)

    visited = set(seeds)
    frontier = set(seeds)
    for _ in range(rounds):
        gathered: set[str] = set()
        for node in frontier:
            gathered |= adjacency.get(node, set())
        frontier = gathered - visited
        visited |= gathered
        if not frontier:
            break
    return visited


def make_store(dim: int = 16, seed: int = 0, log_path=None) -> MemoryStore:
    return MemoryStore(HashEmbedder(dim=dim, seed=seed), log_path=log_path)


def add_simple_clip(store: MemoryStore, n_facts: int, *, start: float = None,
                    clip_len: float = 30.0, text_prefix: str = "fact",
                    names=()) -> ClipNode:
    """Append one clip with n_facts evenly spaced facts."""
    if start is None:
        start = len(store.state.clips) * clip_len
    clip_id = store.new_clip_id()
    span = TimeSpan(start, start + clip_len)
    facts = []
    for i in range(n_facts):
        fid = store.new_fact_id()
        t = start + i * (clip_len / max(n_facts, 1))
        facts.append(FactNode(id=fid, clip_id=clip_id, span=TimeSpan(t, t),
                              text=f"{text_prefix} {fid} at {t}",
                              name_mentions=list(names)))
    clip = ClipNode(id=clip_id, span=span,
                    summary=f"clip {clip_id}: " + "; ".join(f.text for f in facts))
    store.add_clip(clip, facts)
    return clip


def random_linked_store(rng: random.Random, *, n_clips: int = 5,
                        facts_per_clip: int = 4, extra_links: int = 10,
                        dim: int = 16, allow_cycles: bool = True) -> MemoryStore:
    """Random store with relational links (cycles allowed) and the induced
    cross-clip links, for traversal tests."""
    store = make_store(dim=dim, seed=rng.randrange(1 << 16))
    for _ in range(n_clips):
        add_simple_clip(store, facts_per_clip)
    fact_ids = list(store.state.facts)
    if len(fact_ids) < 2:
        return store
    for _ in range(extra_links):
        a, b = rng.sample(fact_ids, 2)
        if not allow_cycles and store.fact_order(a) < store.fact_order(b):
            a, b = b, a
        store.attach_links(a, [Link(target=b, description="random", weight=0.5,
                                    kind="relational")])
        clip_a = store.state.facts[a].clip_id
        clip_b = store.state.facts[b].clip_id
        if clip_a != clip_b:
            store.add_cross_clip_link(clip_a, Link(
                target=clip_b, description=f"induced by {a} -> {b}",
                weight=0.5, kind="cross-clip"))
    return store
