"""Structure-guided iterative retrieval over the memory graph.

One query session: retrieve seed facts by embedding similarity, prune them,
then repeat assess -> expand -> prune -> union until the answer model
declares sufficiency or the turn cap is reached.  The evidence context only
ever grows; expansion walks the documented edge rules and never revisits
nodes already in context, so the loop always halts, cycles included.

Edge rules for expansion from the active frontier:
  * fact -> its parent clip (hierarchy)
  * fact -> relational link targets, plus reverse edges when
    ``traverse_undirected`` is on
  * clip -> every child fact (hierarchy)
  * clip -> cross-clip link targets, plus reverse edges when
    ``traverse_undirected`` is on
The global node never enters the context; its summary is supplied to the
models as side context on every turn instead.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable

from .adapters.base import AssessmentRequest, Passage, PruneRequest
from .adapters.parsing import SelectionParseError, VerdictParseError, \
    parse_selection, parse_verdict
from .store import LEVEL_CLIP, LEVEL_FACT, MemoryStore
from .types import KeyframeRef, NodeId, Verdict

logger = logging.getLogger(__name__)

DEFAULT_K_SEED = 20
DEFAULT_MAX_TURNS = 3


@dataclass
class ReasonerConfig:
    k_seed: int = DEFAULT_K_SEED
    max_turns: int = DEFAULT_MAX_TURNS
    traverse_undirected: bool = True
    include_hierarchy: bool = True
    include_links: bool = True
    include_global: bool = True
    expansion_enabled: bool = True
    # None keeps per-turn elapsed at 0.0 so scripted runs are byte-stable;
    # pass time.perf_counter for real timing.
    clock: Callable[[], float] | None = None


@dataclass
class TurnRecord:
    """What arrived before this turn's verdict, and the verdict itself."""

    turn: int
    expanded: list[NodeId]
    pruned_in: list[NodeId]
    verdict: Verdict
    elapsed: float = 0.0

    def to_dict(self) -> dict:
        return {"turn": self.turn, "expanded": list(self.expanded),
                "pruned_in": list(self.pruned_in),
                "verdict": self.verdict.to_dict(), "elapsed": self.elapsed}


@dataclass
class EvidenceContext:
    """Monotonically growing evidence set plus the active frontier."""

    nodes: list[NodeId] = field(default_factory=list)
    frontier: list[NodeId] = field(default_factory=list)
    turn: int = 0
    trace: list[TurnRecord] = field(default_factory=list)

    def node_set(self) -> set[NodeId]:
        return set(self.nodes)

    def to_dict(self) -> dict:
        return {"nodes": list(self.nodes), "frontier": list(self.frontier),
                "turn": self.turn}


@dataclass
class AnswerResult:
    answer: str | None
    turns_used: int
    context_final: EvidenceContext
    terminated_by: str  # "sufficient" | "max_turns"

    def to_dict(self) -> dict:
        return {
            "answer": self.answer,
            "turns_used": self.turns_used,
            "terminated_by": self.terminated_by,
            "context": self.context_final.to_dict(),
            "trace": [r.to_dict() for r in self.context_final.trace],
        }

    def to_json(self) -> str:
        return result_json(self.to_dict())


def result_json(doc: dict) -> str:
    """Canonical result serialization shared by CLI and HTTP."""
    return json.dumps(doc, ensure_ascii=False, separators=(",", ":"))


class ReasonerError(RuntimeError):
    """Hard adapter failure mid-session; carries the partial context."""

    def __init__(self, message: str, context: EvidenceContext):
        super().__init__(message)
        self.context = context


class Reasoner:
    def __init__(self, store: MemoryStore, reason_model, pruner,
                 config: ReasonerConfig | None = None):
        self.store = store
        self.reason_model = reason_model
        self.pruner = pruner
        self.config = config or ReasonerConfig()

    # -- building blocks ----------------------------------------------------

    def seed_retrieve(self, question: str, k: int | None = None) -> EvidenceContext:
        """Turn-0 context: top-k facts by embedding similarity; the frontier
        is the whole seed set.  An empty store yields an empty context."""
        k = k or self.config.k_seed
        ctx = EvidenceContext()
        if not self.store.state.facts:
            return ctx
        hits = self.store.index.top_k(
            self.store.embedder.embed(question), k, tag=LEVEL_FACT)
        ctx.nodes = [hit.id for hit in hits]
        ctx.frontier = list(ctx.nodes)
        return ctx

    def _passage(self, node_id: NodeId) -> Passage:
        level = self.store.level_of(node_id)
        if level == LEVEL_FACT:
            fact = self.store.state.facts[node_id]
            return Passage(node_id=node_id, level="fact", text=fact.text,
                           start=fact.span.start, end=fact.span.end)
        clip = self.store.state.clips[node_id]
        return Passage(node_id=node_id, level="clip", text=clip.summary,
                       start=clip.span.start, end=clip.span.end)

    def _passages(self, node_ids) -> tuple[Passage, ...]:
        return tuple(self._passage(nid) for nid in node_ids)

    def _profiles(self, node_ids) -> dict[str, str]:
        """Profiles of persons whose evidence intersects the context."""
        present = set(node_ids)
        return {pid: person.profile
                for pid, person in self.store.state.persons.items()
                if present.intersection(person.evidence)}

    def _keyframes(self, node_ids) -> tuple[KeyframeRef, ...]:
        frames: list[KeyframeRef] = []
        for nid in node_ids:
            fact = self.store.state.facts.get(nid)
            if fact is not None:
                frames.extend(fact.keyframes)
        return tuple(frames)

    def _global_summary(self) -> str:
        if not self.config.include_global:
            return ""
        return self.store.state.global_node.summary

    def assess(self, question: str, ctx: EvidenceContext,
               options: tuple[str, ...] | None = None) -> Verdict:
        """One sufficiency assessment.  Unparseable model output fails open
        to Expand; transport failures propagate to the caller."""
        request = AssessmentRequest(
            question=question,
            global_summary=self._global_summary(),
            passages=self._passages(ctx.nodes),
            profiles=self._profiles(ctx.nodes),
            keyframes=self._keyframes(ctx.nodes),
            options=options,
        )
        raw = self.reason_model.assess(request)
        try:
            return parse_verdict(str(raw))
        except VerdictParseError as exc:
            logger.warning("unparseable verdict, treating as expand: %s", exc)
            return Verdict.expand()

    def expand(self, ctx: EvidenceContext) -> list[NodeId]:
        """One-step traversal from the frontier under the edge rules,
        excluding nodes already in context; deterministic order."""
        if not self.config.expansion_enabled:
            return []
        cfg = self.config
        seen = ctx.node_set()
        out: list[NodeId] = []

        def emit(node_id: NodeId) -> None:
            if node_id not in seen:
                seen.add(node_id)
                out.append(node_id)

        for node_id in ctx.frontier:
            level = self.store.level_of(node_id)
            if level == LEVEL_FACT:
                fact = self.store.state.facts[node_id]
                if cfg.include_hierarchy:
                    emit(fact.clip_id)
                if cfg.include_links:
                    for link in fact.links:
                        if link.kind == "relational":
                            emit(link.target)
                    if cfg.traverse_undirected:
                        for source in self.store.incoming_relational(node_id):
                            emit(source)
            elif level == LEVEL_CLIP:
                clip = self.store.state.clips[node_id]
                if cfg.include_hierarchy:
                    for fid in clip.fact_ids:
                        emit(fid)
                if cfg.include_links:
                    for link in clip.cross_clip_links:
                        emit(link.target)
                    if cfg.traverse_undirected:
                        for source in self.store.incoming_cross_clip(node_id):
                            emit(source)
        return out

    def prune(self, question: str, candidates: list[NodeId]) -> list[NodeId]:
        """Model-driven binary selection over the candidates.

        Fail-open: on adapter failure or unparseable output every candidate
        is retained.  The retained set may be empty.
        """
        if not candidates:
            return []
        request = PruneRequest(
            question=question,
            global_summary=self._global_summary(),
            passages=self._passages(candidates),
            profiles=self._profiles(candidates),
        )
        try:
            raw = self.pruner.select(request)
            indices = parse_selection(str(raw), len(candidates))
        except SelectionParseError as exc:
            logger.warning("unparseable selection, retaining all candidates: %s", exc)
            return list(candidates)
        except Exception as exc:
            logger.warning("pruner failed, retaining all candidates: %s", exc)
            return list(candidates)
        return [candidates[i] for i in indices]

    # -- the loop --------------------------------------------------------------

    def answer(self, question: str, k_seed: int | None = None,
               max_turns: int | None = None,
               options: tuple[str, ...] | None = None) -> AnswerResult:
        """Run the full session: seeds, initial prune, then up to
        ``max_turns`` assess/expand/prune cycles.

        ``turns_used`` counts assessments.  The context grows monotonically;
        with an everything-passes pruner the final context after hitting the
        cap R equals the R-step closure of the seed set under the edge
        rules.
        """
        cap = max_turns or self.config.max_turns
        if cap < 1:
            raise ValueError("max_turns must be >= 1")
        clock = self.config.clock or (lambda: 0.0)
        ctx = self.seed_retrieve(question, k_seed)
        seeds = list(ctx.nodes)
        if not seeds:
            return AnswerResult(answer=None, turns_used=0, context_final=ctx,
                                terminated_by="max_turns")
        retained = self.prune(question, seeds)
        ctx.nodes = list(retained)
        ctx.frontier = list(retained)
        arrived, kept = seeds, retained

        while True:
            started = clock()
            try:
                verdict = self.assess(question, ctx, options)
            except Exception as exc:
                raise ReasonerError(f"assessment failed: {exc}", ctx) from exc
            record = TurnRecord(turn=ctx.turn, expanded=list(arrived),
                                pruned_in=list(kept), verdict=verdict,
                                elapsed=clock() - started)
            ctx.trace.append(record)
            if verdict.is_answer:
                return AnswerResult(answer=verdict.text, turns_used=len(ctx.trace),
                                    context_final=ctx, terminated_by="sufficient")
            expanded = self.expand(ctx)
            record.elapsed = clock() - started
            if not expanded:
                # Saturated: nothing new reachable, so re-assessing the same
                # context cannot change the verdict.
                return AnswerResult(answer=None, turns_used=len(ctx.trace),
                                    context_final=ctx, terminated_by="max_turns")
            retained = self.prune(question, expanded)
            ctx.nodes.extend(retained)
            ctx.frontier = list(retained)
            ctx.turn += 1
            record.elapsed = clock() - started
            arrived, kept = expanded, retained
            if ctx.turn >= cap:
                return AnswerResult(answer=None, turns_used=len(ctx.trace),
                                    context_final=ctx, terminated_by="max_turns")
