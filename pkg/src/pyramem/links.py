"""Sparse relational link construction among fact memories.

For each new fact the builder retrieves the top-K most similar historical
facts (ingested strictly earlier), asks a pluggable judge which of them are
genuinely related, attaches the judged links, and induces clip-to-clip
links whenever a relational link crosses clip boundaries.  Judge failures
never fail ingestion: a misbehaving judge yields zero links and a warning.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

from .store import MemoryStore
from .types import DEFAULT_LINK_WEIGHT, FactNode, Link, NodeId

logger = logging.getLogger(__name__)

DEFAULT_K_LINK = 10


@dataclass
class LinkProposal:
    """Audit record of one fact's link construction round."""

    source: NodeId
    candidates: list[tuple[NodeId, float]] = field(default_factory=list)
    judged: list[Link] = field(default_factory=list)


def _fact_payload(fact: FactNode) -> dict:
    return {"node_id": fact.id, "text": fact.text, "timestamp": fact.span.start}


class LinkBuilder:
    def __init__(self, store: MemoryStore, judge, k_link: int = DEFAULT_K_LINK):
        if k_link < 1:
            raise ValueError("k_link must be >= 1")
        self.store = store
        self.judge = judge
        self.k_link = k_link

    def propose_candidates(self, new_fact: FactNode,
                           k_link: int | None = None) -> list[tuple[NodeId, float]]:
        """Top-K historical facts by cosine similarity to the new fact.

        Historical means ingested before the new fact, so links always point
        backward in ingestion time; same-clip facts are eligible.  An empty
        history yields an empty list.
        """
        k = k_link or self.k_link
        older = self.store.facts_ingested_before(new_fact.id)
        if not older:
            return []
        query = self.store.index.top_k(
            self.store.embedder.embed(new_fact.text), k,
            tag="fact", filter=older.__contains__)
        return [(hit.id, hit.score) for hit in query]

    def judge_and_attach(self, new_fact: FactNode,
                         candidates: list[tuple[NodeId, float]]) -> list[Link]:
        """Run the judge over the candidates and attach the accepted links.

        Judge output referencing non-candidate ids is dropped with a
        warning; weights are clamped to [0, 1] (missing weight defaults to
        the neutral 0.5).  Unparseable judge output attaches nothing.
        """
        if not candidates:
            return []
        candidate_ids = {cid for cid, _ in candidates}
        payload = [_fact_payload(self.store.state.facts[cid]) for cid, _ in candidates]
        try:
            raw = self.judge.judge(_fact_payload(new_fact), payload)
            doc = json.loads(raw)
            items = doc["links"]
        except Exception as exc:
            logger.warning("link judge failed for %s: %s", new_fact.id, exc)
            return []
        links: list[Link] = []
        for item in items:
            try:
                target = str(item["target"])
            except (TypeError, KeyError):
                logger.warning("link judge emitted a link without target for %s",
                               new_fact.id)
                continue
            if target not in candidate_ids:
                logger.warning("link judge referenced non-candidate %s for %s; dropped",
                               target, new_fact.id)
                continue
            try:
                weight = float(item.get("weight", DEFAULT_LINK_WEIGHT))
            except (TypeError, ValueError):
                weight = DEFAULT_LINK_WEIGHT
            weight = min(1.0, max(0.0, weight))
            links.append(Link(target=target,
                              description=str(item.get("description", "")),
                              weight=weight, kind="relational"))
        if links:
            self.store.attach_links(new_fact.id, links)
        return links

    def induce_cross_clip_link(self, fact_link: Link,
                               source_fact: FactNode) -> Link | None:
        """Mirror a relational fact link at clip level.

        When the two facts live in different clips and no cross-clip link
        exists for that clip pair yet, one is created carrying the fact
        link's weight; same-clip links are a no-op.  Idempotent.
        """
        target_fact = self.store.state.facts[fact_link.target]
        source_clip = source_fact.clip_id
        target_clip = target_fact.clip_id
        if source_clip == target_clip:
            return None
        link = Link(target=target_clip,
                    description=f"induced by {source_fact.id} -> {target_fact.id}",
                    weight=fact_link.weight, kind="cross-clip")
        created = self.store.add_cross_clip_link(source_clip, link)
        return link if created else None

    def build_for_fact(self, new_fact: FactNode) -> LinkProposal:
        """Full round for one fact: candidates, judgment, induction."""
        proposal = LinkProposal(source=new_fact.id)
        proposal.candidates = self.propose_candidates(new_fact)
        proposal.judged = self.judge_and_attach(new_fact, proposal.candidates)
        for link in proposal.judged:
            self.induce_cross_clip_link(link, new_fact)
        return proposal
