#!/usr/bin/env python3
"""End-to-end demo: build a small memory pyramid from a scripted event
stream, then answer a question that needs link expansion to resolve.

The stream plants the classic shape: the query-matched fact (someone
returning to the kitchen) is only explainable through an earlier, weakly
related fact (the kettle left on the stove), reachable via a judged
relational link.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from pyramem.adapters.scripted import (  # noqa: E402
    AppendProfiler,
    ConcatUpdater,
    HashEmbedder,
    KeywordLinkJudge,
    MarkerNodeAnswerer,
    ScriptedEventExtractor,
    TokenOverlapPruner,
)
from pyramem.ingest import IngestPipeline, StreamEvent  # noqa: E402
from pyramem.reasoner import Reasoner, ReasonerConfig  # noqa: E402
from pyramem.store import MemoryStore  # noqa: E402

EVENTS = [
    StreamEvent(t=2, text="nadia fills the kettle at the sink", names=("nadia",)),
    StreamEvent(t=9, text="nadia leaves the kettle on the stove", names=("nadia",)),
    StreamEvent(t=15, text="nadia walks to the garden with a book"),
    StreamEvent(t=40, text="birds gather near the feeder"),
    StreamEvent(t=48, text="a chapter is finished under the tree"),
    StreamEvent(t=75, text="a sharp whistle sounds from the house"),
    StreamEvent(t=82, text="nadia returns to the kitchen quickly",
                names=("nadia",)),
]

QUESTION = "why did nadia return to the kitchen"


def main() -> int:
    store = MemoryStore(HashEmbedder(dim=48, seed=1))
    pipeline = IngestPipeline(
        store,
        extractor=ScriptedEventExtractor(),
        global_updater=ConcatUpdater(),
        link_judge=KeywordLinkJudge(),
        profiler=AppendProfiler(),
        face_embedder=HashEmbedder(dim=48, seed=2),
    )
    report = pipeline.ingest_events(EVENTS)
    print(f"ingested {report.clips} clips / {report.facts} facts / "
          f"{report.links} relational links / {report.persons_created} persons")

    # the decisive fact: the kettle left on the stove (fact f-2)
    decisive = next(fid for fid, f in store.state.facts.items()
                    if "leaves the kettle" in f.text)
    reasoner = Reasoner(
        store,
        MarkerNodeAnswerer({decisive}, "the kettle she left on the stove "
                                       "started whistling"),
        TokenOverlapPruner(),
        ReasonerConfig(k_seed=3, max_turns=3),
    )
    result = reasoner.answer(QUESTION)

    print(f"\nquestion: {QUESTION}")
    for record in result.context_final.trace:
        verdict = record.verdict
        shown = f"[ANSWER] {verdict.text}" if verdict.is_answer else "[Expand]"
        print(f"  turn {record.turn}: +{len(record.expanded)} candidates, "
              f"kept {len(record.pruned_in)} -> {shown}")
    print(f"\nanswer: {result.answer}")
    print(f"terminated_by: {result.terminated_by}, "
          f"context: {result.context_final.nodes}")
    return 0 if result.terminated_by == "sufficient" else 1


if __name__ == "__main__":
    raise SystemExit(main())
