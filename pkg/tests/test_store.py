import json
import random
import threading
import time

import pytest

from helpers import add_simple_clip, make_store, random_linked_store
from pyramem.adapters.scripted import ConcatUpdater, FailingModel
from pyramem.store import (
    DuplicateIdError,
    GlobalUpdateError,
    MemoryStore,
    NodeNotFound,
    SpanViolation,
)
from pyramem.types import (
    GLOBAL_NODE_ID,
    ClipNode,
    FactNode,
    Link,
    SnapshotError,
    TimeSpan,
    validate_graph,
)


def clip_with_facts(store, clip_id, n, start=0.0, length=30.0):
    span = TimeSpan(start, start + length)
    facts = [FactNode(id=f"{clip_id}-fact-{i}", clip_id=clip_id,
                      span=TimeSpan(start + i, start + i + 1), text=f"text {i}")
             for i in range(n)]
    return ClipNode(id=clip_id, span=span, summary=f"summary of {clip_id}"), facts


class TestAddClip:
    def test_first_clip_counts(self):
        store = make_store()
        clip, facts = clip_with_facts(store, "c-1", 3)
        store.add_clip(clip, facts)
        assert len(store.state.facts) == 3
        assert len(store.state.clips) == 1
        # hierarchical links: materialized hier-up on each fact plus the
        # derived downward/global pathways exposed via neighbors()
        up = [store.neighbors(f.id, {"hier-up"}) for f in facts]
        assert all(len(links) == 1 and links[0][0] == "c-1" for links in up)
        down = store.neighbors("c-1", {"hier-down"})
        assert [target for target, _ in down] == [f.id for f in facts]
        assert store.neighbors("c-1", {"hier-up"})[0][0] == GLOBAL_NODE_ID
        assert [t for t, _ in store.neighbors(GLOBAL_NODE_ID, {"hier-down"})] == ["c-1"]
        hier_link_count = len(down) + sum(len(l) for l in up)
        assert hier_link_count == 6
        assert store.stats()["links"]["hier-up"] == 4  # 3 facts + 1 clip

    def test_duplicate_clip_id_rejected(self):
        store = make_store()
        clip, facts = clip_with_facts(store, "c-1", 2)
        store.add_clip(clip, facts)
        clip2, facts2 = clip_with_facts(store, "c-1", 2)
        with pytest.raises(DuplicateIdError):
            store.add_clip(clip2, facts2)

    def test_span_violation_names_fact(self):
        store = make_store()
        clip, facts = clip_with_facts(store, "c-1", 2)
        facts[1].span = TimeSpan(0, 99)
        with pytest.raises(SpanViolation) as err:
            store.add_clip(clip, facts)
        assert "c-1-fact-1" in str(err.value)
        # atomic: nothing inserted
        assert not store.state.facts and not store.state.clips

    def test_clip_id_mismatch_rejected(self):
        store = make_store()
        clip, facts = clip_with_facts(store, "c-1", 2)
        facts[0].clip_id = "c-9"
        with pytest.raises(Exception):
            store.add_clip(clip, facts)

    def test_embeddings_registered_with_level_tags(self):
        store = make_store()
        clip, facts = clip_with_facts(store, "c-1", 2)
        store.add_clip(clip, facts)
        assert store.index.tag_of("c-1") == "clip"
        assert store.index.tag_of("c-1-fact-0") == "fact"

    def test_ten_synthetic_clips_validate(self):
        store = make_store()
        for _ in range(10):
            add_simple_clip(store, 4)
        assert validate_graph(store.state) == []


class TestUpdateGlobal:
    def test_base_case(self):
        store = make_store()
        g = store.update_global("first clip", ConcatUpdater())
        assert g.summary == "first clip"
        assert g.version == 1 and g.clips_integrated == 1

    def test_fold_oracle(self):
        store = make_store()
        updater = ConcatUpdater()
        parts = ["a", "b", "c"]
        for part in parts:
            store.update_global(part, updater)
        expected = ""
        for part in parts:  # independent fold
            expected = part if not expected else expected + " | " + part
        g = store.state.global_node
        assert g.summary == expected == "a | b | c"
        assert g.version == 3

    def test_adapter_failure_is_atomic(self):
        store = make_store()
        store.update_global("a", ConcatUpdater())
        with pytest.raises(GlobalUpdateError) as err:
            store.update_global("b", FailingModel())
        assert "retry" in str(err.value)
        g = store.state.global_node
        assert g.summary == "a" and g.version == 1 and g.clips_integrated == 1


class TestNeighbors:
    def test_no_relational_links(self):
        store = make_store()
        add_simple_clip(store, 2)
        assert store.neighbors("f-1", {"relational"}) == []

    def test_unknown_id(self):
        store = make_store()
        with pytest.raises(NodeNotFound):
            store.neighbors("f-404", {"hier-up"})

    def test_matches_adjacency_oracle_on_random_graphs(self):
        rng = random.Random(2024)
        for _ in range(5):
            store = make_store(seed=rng.randrange(1000))
            oracle: dict[str, list[str]] = {}
            for _ in range(5):
                add_simple_clip(store, 10)
            fact_ids = list(store.state.facts)
            for _ in range(50):
                a, b = rng.sample(fact_ids, 2)
                store.attach_links(a, [Link(target=b, kind="relational")])
                oracle.setdefault(a, []).append(b)
            for fid in fact_ids:
                got = [t for t, _ in store.neighbors(fid, {"relational"})]
                assert got == oracle.get(fid, [])

    def test_kind_filtering(self):
        store = make_store()
        add_simple_clip(store, 2)
        add_simple_clip(store, 2)
        store.attach_links("f-3", [Link(target="f-1", kind="relational")])
        store.add_cross_clip_link("c-2", Link(target="c-1", kind="cross-clip"))
        assert [t for t, _ in store.neighbors("f-3", {"relational"})] == ["f-1"]
        both = store.neighbors("f-3", {"relational", "hier-up"})
        assert {t for t, _ in both} == {"f-1", "c-2"}
        assert [t for t, _ in store.neighbors("c-2", {"cross-clip"})] == ["c-1"]


class TestAttachLinks:
    def test_target_must_exist(self):
        store = make_store()
        add_simple_clip(store, 2)
        with pytest.raises(NodeNotFound):
            store.attach_links("f-1", [Link(target="f-77", kind="relational")])

    def test_reverse_index_tracks_sources(self):
        store = make_store()
        add_simple_clip(store, 3)
        store.attach_links("f-2", [Link(target="f-1", kind="relational")])
        store.attach_links("f-3", [Link(target="f-1", kind="relational")])
        assert store.incoming_relational("f-1") == ["f-2", "f-3"]

    def test_cross_clip_dedup(self):
        store = make_store()
        add_simple_clip(store, 2)
        add_simple_clip(store, 2)
        link = Link(target="c-1", kind="cross-clip", weight=0.4)
        assert store.add_cross_clip_link("c-2", link) is True
        assert store.add_cross_clip_link("c-2", link) is False
        assert len(store.state.clips["c-2"].cross_clip_links) == 1


class TestPersistence:
    def test_empty_store_round_trip(self, tmp_path):
        store = make_store()
        path = tmp_path / "snap.json"
        store.save(path)
        loaded = MemoryStore.load(path, store.embedder)
        assert loaded.state == store.state

    def test_ten_clip_round_trip(self, tmp_path):
        rng = random.Random(5)
        store = random_linked_store(rng, n_clips=10, facts_per_clip=3)
        store.update_global("summary", ConcatUpdater())
        path = tmp_path / "snap.json"
        store.save(path)
        loaded = MemoryStore.load(path, store.embedder)
        assert loaded.state == store.state
        assert validate_graph(loaded.state) == []
        # index rebuilt identically: same ranking for an arbitrary query
        q = store.embedder.embed("query")
        assert store.index.top_k(q, 10) == loaded.index.top_k(q, 10)
        # reverse maps rebuilt
        for fid in store.state.facts:
            assert store.incoming_relational(fid) == loaded.incoming_relational(fid)

    def test_truncated_file_fails_atomically(self, tmp_path):
        store = make_store()
        add_simple_clip(store, 2)
        path = tmp_path / "snap.json"
        store.save(path)
        path.write_text(path.read_text()[:50], encoding="utf-8")
        with pytest.raises(SnapshotError):
            MemoryStore.load(path, store.embedder)

    def test_id_counters_resume_after_load(self, tmp_path):
        store = make_store()
        add_simple_clip(store, 3)
        path = tmp_path / "snap.json"
        store.save(path)
        loaded = MemoryStore.load(path, store.embedder)
        assert loaded.new_fact_id() == "f-4"
        assert loaded.new_clip_id() == "c-2"

    def test_save_is_atomic_replace(self, tmp_path):
        store = make_store()
        add_simple_clip(store, 1)
        path = tmp_path / "snap.json"
        store.save(path)
        first = path.read_text()
        add_simple_clip(store, 1)
        store.save(path)
        assert path.read_text() != first
        assert not (tmp_path / "snap.json.tmp").exists()


class TestEventLog:
    def test_mutation_events_appended(self, tmp_path):
        log = tmp_path / "events.log"
        store = make_store(log_path=log)
        add_simple_clip(store, 2)
        store.attach_links("f-2", [Link(target="f-1", kind="relational")])
        store.update_global("s", ConcatUpdater())
        events = [json.loads(line) for line in log.read_text().splitlines()]
        assert [e["event"] for e in events] == ["add_clip", "attach_links",
                                                "update_global"]
        assert events[0]["fact_ids"] == ["f-1", "f-2"]


class TestStats:
    def test_counts_and_histogram(self):
        store = make_store()
        add_simple_clip(store, 3)
        add_simple_clip(store, 2)
        store.attach_links("f-4", [Link(target="f-1", kind="relational"),
                                   Link(target="f-2", kind="relational")])
        store.update_global("s", ConcatUpdater())
        stats = store.stats()
        assert stats["facts"] == 5 and stats["clips"] == 2
        assert stats["global_version"] == 1
        assert stats["links"]["relational"] == 2
        assert stats["relational_degree_histogram"] == {"0": 4, "2": 1}


class TestHierarchyReachability:
    def test_every_fact_two_hops_from_global(self):
        store = make_store()
        for _ in range(6):
            add_simple_clip(store, 3)
        reachable = set()
        for clip_id, _ in store.neighbors(GLOBAL_NODE_ID, {"hier-down"}):
            for fact_id, _ in store.neighbors(clip_id, {"hier-down"}):
                reachable.add(fact_id)
        assert reachable == set(store.state.facts)


class TestMonotonicity:
    def test_fact_ids_never_shrink(self):
        store = make_store()
        seen: set[str] = set()
        for _ in range(8):
            add_simple_clip(store, 3)
            current = set(store.state.facts)
            assert seen.issubset(current)
            seen = current


def test_concurrent_readers_with_exclusive_writer():
    store = make_store()
    add_simple_clip(store, 3)
    in_read = threading.Event()
    writer_done = threading.Event()
    order = []

    def reader():
        with store.reading():
            in_read.set()
            time.sleep(0.05)
            order.append("read-end")

    def writer():
        in_read.wait()
        with store.writing():
            order.append("write")
        writer_done.set()

    threads = [threading.Thread(target=reader), threading.Thread(target=writer)]
    for t in threads:
        t.start()
    for t in threads:
        t.join(timeout=2)
    assert order == ["read-end", "write"]  # writer waited for the reader
