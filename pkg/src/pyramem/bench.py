"""Ablation and latency harness over synthetic multi-hop workloads.

Each synthetic task plants an evidence chain in a generated event stream:
the question text matches exactly one anchor fact (guaranteed top seed),
directive tokens force relational links hop by hop back to a decisive fact,
and the decisive fact is verified to sit outside the seed retrieval set.
The oracle answer model declares sufficiency exactly when the decisive fact
id is in context, so accuracy isolates retrieval behavior from model
quality.  Memory-structure variants are masked at query time (a plain-
memory run ignores hierarchy and the global summary rather than rebuilding
the store), which is observationally equivalent for the oracle.

The socratic baseline is scored separately: it retrieves clip summaries
only, so it is correct when the decisive fact's clip is retrieved (clip
summaries contain their fact texts verbatim under the scripted extractor).
At desk-scale store sizes (fewer clips than the retrieval budget) it
saturates; it is included for shape, not for the ordering criteria.
"""

from __future__ import annotations

import csv
import json
import math
import random
import time
from dataclasses import dataclass
from pathlib import Path

from .adapters.scripted import (
    ConcatUpdater,
    DelayedAnswerer,
    DirectiveLinkJudge,
    HashEmbedder,
    MarkerNodeAnswerer,
    ScriptedEventExtractor,
    SelectAllPruner,
    TokenOverlapPruner,
)
from .index import brute_force_rank
from .ingest import IngestPipeline, StreamEvent
from .reasoner import Reasoner, ReasonerConfig
from .store import MemoryStore


@dataclass(frozen=True)
class Variant:
    """One memory/search configuration of the engine."""

    name: str
    memory: str = "hierarchical"  # "hierarchical" | "plain"
    links: bool = True
    global_ctx: bool = True
    expand: bool = True
    prune: bool = True
    socratic: bool = False

    def __post_init__(self):
        if self.memory not in ("hierarchical", "plain"):
            raise ValueError(f"unknown memory kind {self.memory!r}")
        if self.socratic and (self.expand or self.prune):
            raise ValueError("socratic variant is one-shot clip retrieval: "
                             "expand/prune must be off")


VARIANTS: dict[str, Variant] = {
    "full": Variant("full"),
    "plain_no_link": Variant("plain_no_link", memory="plain", links=False,
                             global_ctx=False),
    "plain_with_link": Variant("plain_with_link", memory="plain", global_ctx=False),
    "no_global_no_link": Variant("no_global_no_link", links=False, global_ctx=False),
    "no_global_with_link": Variant("no_global_with_link", global_ctx=False),
    "no_expand": Variant("no_expand", expand=False),
    "no_prune": Variant("no_prune", prune=False),
    "socratic": Variant("socratic", memory="plain", links=False, global_ctx=False,
                        expand=False, prune=False, socratic=True),
}


@dataclass
class BenchConfig:
    dim: int = 32
    seed: int = 0
    clip_len: float = 30.0
    k_seed: int = 20
    max_turns: int = 3
    k_link: int = 10
    n_clips: int = 6
    facts_per_clip: int = 8

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "BenchConfig":
        return cls(**d)


@dataclass
class SyntheticTask:
    """One planted multi-hop question over a generated stream."""

    stream: list[StreamEvent]
    question: str
    gold: str
    evidence_hops: int
    decisive_token: str  # unique token identifying the decisive fact's text

    def to_dict(self) -> dict:
        return {"stream": [ev.to_dict() for ev in self.stream],
                "question": self.question, "gold": self.gold,
                "evidence_hops": self.evidence_hops,
                "decisive_token": self.decisive_token}

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticTask":
        return cls(stream=[StreamEvent.from_dict(e) for e in d["stream"]],
                   question=str(d["question"]), gold=str(d["gold"]),
                   evidence_hops=int(d["evidence_hops"]),
                   decisive_token=str(d["decisive_token"]))


@dataclass
class LatencyReport:
    """Nearest-rank percentiles plus the mean over one latency sample."""

    p50: float
    p95: float
    mean: float

    @classmethod
    def from_samples(cls, samples: list[float]) -> "LatencyReport":
        if not samples:
            return cls(0.0, 0.0, 0.0)
        ordered = sorted(samples)
        return cls(p50=nearest_rank(ordered, 50), p95=nearest_rank(ordered, 95),
                   mean=sum(ordered) / len(ordered))


@dataclass
class VariantReport:
    variant: str
    accuracy: float
    latency: LatencyReport
    mean_context_size: float

    def to_row(self) -> dict:
        return {"variant": self.variant, "accuracy": round(self.accuracy, 6),
                "p50": round(self.latency.p50, 6), "p95": round(self.latency.p95, 6),
                "mean": round(self.latency.mean, 6),
                "mean_context_size": round(self.mean_context_size, 6)}


def nearest_rank(ordered: list[float], percentile: float) -> float:
    """Nearest-rank percentile over an ascending sample: the ceil(p/100*n)-th
    smallest value (1-indexed)."""
    if not ordered:
        raise ValueError("empty sample")
    rank = max(1, math.ceil(percentile / 100.0 * len(ordered)))
    return ordered[min(rank, len(ordered)) - 1]


# ---------------------------------------------------------------------------
# Workload generation
# ---------------------------------------------------------------------------

def _hop_sequence(n_tasks: int, hop_distribution: dict[int, float]) -> list[int]:
    """Deterministic per-task hop counts honoring the given proportions."""
    if not hop_distribution:
        raise ValueError("hop_distribution must be non-empty")
    total = sum(hop_distribution.values())
    hops = sorted(hop_distribution)
    counts = {h: int(n_tasks * hop_distribution[h] / total) for h in hops}
    short = n_tasks - sum(counts.values())
    for h in hops:
        if short == 0:
            break
        counts[h] += 1
        short -= 1
    seq: list[int] = []
    for h in hops:
        seq.extend([h] * counts[h])
    return seq


def _rank_of(target_vec, competitor_vecs, query_vec) -> int:
    """0-based rank of the target among competitors for the query (cosine
    descending); competitors exclude the target itself."""
    hits = brute_force_rank(
        [("t", target_vec)] + [(f"x{i}", v) for i, v in enumerate(competitor_vecs)],
        query_vec)
    for rank, hit in enumerate(hits):
        if hit.id == "t":
            return rank
    raise AssertionError("target not ranked")


def _generate_task(task_idx: int, hops: int, cfg: BenchConfig,
                   embedder: HashEmbedder) -> SyntheticTask:
    """Build one task whose guarantees hold by construction.

    Link-candidate visibility (each chain source sees its target among its
    top-K link candidates) and seed placement (the anchor ranks inside the
    question's top-k seeds, every chain fact outside) are enforced by
    deterministic salt resampling against the same embedder the run uses.
    """
    rng = random.Random(f"{cfg.seed}:{task_idx}")
    n_events = cfg.n_clips * cfg.facts_per_clip
    step = cfg.clip_len / cfg.facts_per_clip
    nonce = f"topic{cfg.seed:02d}{task_idx:04d}"
    gold = f"ans{task_idx:04d}"
    markers = [f"mk{task_idx:04d}x{j}" for j in range(hops + 1)]

    # Chain positions: decisive earliest, anchor last; intermediates spread
    # between them in arrival order (links only ever point backward).
    anchor_pos = n_events - 1
    if hops > 0:
        if anchor_pos - 2 < hops:
            raise ValueError(f"stream of {n_events} events cannot hold a "
                             f"{hops}-hop chain plus distractors")
        chain_positions = sorted(rng.sample(range(1, anchor_pos - 1), hops))
    else:
        chain_positions = []

    texts: list[str | None] = [None] * n_events
    # Distractors: disjoint "dz" token namespace, with their own directive
    # links for graph volume.
    distractor_markers: list[str] = []
    for pos in range(n_events):
        if pos == anchor_pos or pos in chain_positions:
            continue
        own = f"dz{task_idx:04d}m{pos}"
        words = " ".join(f"dzw{rng.randrange(40)}" for _ in range(4))
        directive = ""
        if distractor_markers and rng.random() < 0.5:
            directive = f" >>{rng.choice(distractor_markers)}"
        texts[pos] = f"{words} note {own}{directive}"
        distractor_markers.append(own)

    embeddings: dict[int, object] = {}

    def embedding_at(pos: int):
        if pos not in embeddings:
            embeddings[pos] = embedder.embed(texts[pos])
        return embeddings[pos]

    def finalize(pos: int, make_text, needs_target: int | None) -> None:
        """Set texts[pos], salting until the link target (if any) ranks
        inside the top-K candidates the judge will actually be shown."""
        historical = [p for p in range(pos) if texts[p] is not None]
        salt = 0
        while True:
            candidate = make_text(salt)
            vec = embedder.embed(candidate)
            if needs_target is None:
                break
            competitors = [embedding_at(p) for p in historical if p != needs_target]
            if _rank_of(embedding_at(needs_target), competitors, vec) < cfg.k_link:
                break
            salt += 1
            if salt > 100000:
                raise RuntimeError("workload construction failed to place a "
                                   "chain link candidate")
        texts[pos] = candidate
        embeddings[pos] = vec

    if hops > 0:
        finalize(chain_positions[0],
                 lambda s: f"{nonce} outcome {gold} stage{hops} {markers[hops]} s{s}",
                 needs_target=None)
        for j in range(hops - 1, 0, -1):
            pos = chain_positions[hops - j]
            prev_pos = chain_positions[hops - j - 1]
            finalize(pos,
                     lambda s, j=j: f"{nonce} trail stage{j} {markers[j]} "
                                    f">>{markers[j + 1]} s{s}",
                     needs_target=prev_pos)
        finalize(anchor_pos,
                 lambda s: f"{nonce} incident reported in full >>{markers[1]} s{s}",
                 needs_target=chain_positions[-1])
    else:
        finalize(anchor_pos,
                 lambda s: f"outcome {gold} of the {nonce} incident s{s}",
                 needs_target=None)

    # Question: a separate string sharing the nonce token (so the scripted
    # pruner keeps nonce-bearing passages), resampled until the anchor is a
    # seed and no chain fact is.
    all_vecs = [embedding_at(p) for p in range(n_events)]
    chain_set = set(chain_positions)
    qsalt = 0
    while True:
        question = f"what happened after the {nonce} incident q{qsalt}"
        q_vec = embedder.embed(question)
        hits = brute_force_rank([(str(p), v) for p, v in enumerate(all_vecs)], q_vec)
        top = {int(h.id) for h in hits[:cfg.k_seed]}
        if anchor_pos in top and not (chain_set & top):
            break
        qsalt += 1
        if qsalt > 100000:
            raise RuntimeError("workload construction failed to place seeds")

    stream = [StreamEvent(t=round(pos * step, 6), text=texts[pos])
              for pos in range(n_events)]
    return SyntheticTask(stream=stream, question=question, gold=gold,
                         evidence_hops=hops, decisive_token=gold)


def generate_workload(n_tasks: int, hop_distribution: dict[int, float],
                      seed: int, cfg: BenchConfig | None = None) -> list[SyntheticTask]:
    """Deterministic planted-chain workload; the same seed always yields the
    same tasks."""
    cfg = cfg or BenchConfig()
    cfg = BenchConfig(**{**cfg.__dict__, "seed": seed})
    embedder = HashEmbedder(dim=cfg.dim, seed=cfg.seed)
    return [_generate_task(i, hops, cfg, embedder)
            for i, hops in enumerate(_hop_sequence(n_tasks, hop_distribution))]


# ---------------------------------------------------------------------------
# Running variants
# ---------------------------------------------------------------------------

def build_task_store(task: SyntheticTask, cfg: BenchConfig) -> tuple[MemoryStore, str]:
    """Ingest the task's stream into a fresh store; returns the store and
    the decisive fact's node id (located by its unique token)."""
    store = MemoryStore(HashEmbedder(dim=cfg.dim, seed=cfg.seed))
    pipeline = IngestPipeline(
        store, extractor=ScriptedEventExtractor(), global_updater=ConcatUpdater(),
        link_judge=DirectiveLinkJudge(), k_link=cfg.k_link, clip_len=cfg.clip_len)
    pipeline.ingest_events(task.stream)
    decisive_id = next(fid for fid, fact in store.state.facts.items()
                       if task.decisive_token in fact.text.split())
    return store, decisive_id


def _variant_reasoner(variant: Variant, store: MemoryStore, decisive_id: str,
                      task: SyntheticTask, cfg: BenchConfig,
                      delay_per_node: float) -> Reasoner:
    answerer = MarkerNodeAnswerer({decisive_id}, task.gold)
    if delay_per_node > 0:
        answerer = DelayedAnswerer(answerer, delay_per_node)
    pruner = TokenOverlapPruner() if variant.prune else SelectAllPruner()
    config = ReasonerConfig(
        k_seed=cfg.k_seed,
        max_turns=cfg.max_turns,
        include_hierarchy=variant.memory == "hierarchical",
        include_links=variant.links,
        include_global=variant.global_ctx,
        expansion_enabled=variant.expand,
    )
    return Reasoner(store, answerer, pruner, config)


@dataclass
class TaskOutcome:
    correct: bool
    latency: float
    context_size: int


def run_task_variant(task: SyntheticTask, variant: Variant, store: MemoryStore,
                     decisive_id: str, cfg: BenchConfig,
                     delay_per_node: float = 0.0) -> TaskOutcome:
    started = time.perf_counter()
    if variant.socratic:
        hits = store.index.top_k(store.embedder.embed(task.question), 20, tag="clip")
        if delay_per_node > 0:
            time.sleep(delay_per_node * len(hits))
        decisive_clip = store.state.facts[decisive_id].clip_id
        correct = any(hit.id == decisive_clip for hit in hits)
        return TaskOutcome(correct=correct, latency=time.perf_counter() - started,
                           context_size=len(hits))
    reasoner = _variant_reasoner(variant, store, decisive_id, task, cfg, delay_per_node)
    result = reasoner.answer(task.question)
    return TaskOutcome(correct=result.answer == task.gold,
                       latency=time.perf_counter() - started,
                       context_size=len(result.context_final.nodes))


def resolve_variants(names) -> list[Variant]:
    """Map variant names (or "all") to Variant instances; unknown names are
    an error."""
    if isinstance(names, str):
        names = [names]
    out: list[Variant] = []
    for name in names:
        if name == "all":
            out.extend(VARIANTS.values())
        elif name in VARIANTS:
            out.append(VARIANTS[name])
        else:
            raise ValueError(f"unknown variant {name!r}; "
                             f"known: {', '.join(VARIANTS)}")
    return out


def run_ablation(workload: list[SyntheticTask], variants,
                 cfg: BenchConfig | None = None,
                 delay_per_node: float = 0.0) -> list[VariantReport]:
    """Run every variant over the workload; stores are built once per task
    and shared across variants (queries never mutate them)."""
    cfg = cfg or BenchConfig()
    if isinstance(variants, str):
        variants = resolve_variants(variants)
    else:
        variants = [v if isinstance(v, Variant) else resolve_variants(v)[0]
                    for v in variants]
    prepared = [build_task_store(task, cfg) for task in workload]
    reports = []
    for variant in variants:
        outcomes = [
            run_task_variant(task, variant, store, decisive_id, cfg, delay_per_node)
            for task, (store, decisive_id) in zip(workload, prepared)
        ]
        n = len(outcomes)
        reports.append(VariantReport(
            variant=variant.name,
            accuracy=sum(o.correct for o in outcomes) / n if n else 0.0,
            latency=LatencyReport.from_samples([o.latency for o in outcomes]),
            mean_context_size=(sum(o.context_size for o in outcomes) / n) if n else 0.0,
        ))
    return reports


def write_csv(reports: list[VariantReport], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=[
            "variant", "accuracy", "p50", "p95", "mean", "mean_context_size"])
        writer.writeheader()
        for report in reports:
            writer.writerow(report.to_row())


def format_table(reports: list[VariantReport]) -> str:
    header = f"{'variant':<22}{'accuracy':>10}{'p50':>10}{'p95':>10}" \
             f"{'mean':>10}{'mean_ctx':>10}"
    lines = [header, "-" * len(header)]
    for r in reports:
        lines.append(f"{r.variant:<22}{r.accuracy:>10.3f}{r.latency.p50:>10.4f}"
                     f"{r.latency.p95:>10.4f}{r.latency.mean:>10.4f}"
                     f"{r.mean_context_size:>10.2f}")
    return "\n".join(lines)


def save_workload(workload: list[SyntheticTask], path: str | Path,
                  cfg: BenchConfig) -> None:
    """Persist tasks together with the config they were constructed against;
    the construction guarantees only hold under that embedder binding."""
    doc = {"config": cfg.to_dict(), "tasks": [t.to_dict() for t in workload]}
    Path(path).write_text(json.dumps(doc, ensure_ascii=False, indent=2),
                          encoding="utf-8")


def load_workload(path: str | Path) -> tuple[list[SyntheticTask], BenchConfig]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    cfg = BenchConfig.from_dict(doc["config"])
    return [SyntheticTask.from_dict(t) for t in doc["tasks"]], cfg
