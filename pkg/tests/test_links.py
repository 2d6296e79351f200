import json
import random

from helpers import add_simple_clip, make_store
from pyramem.adapters.scripted import FailingModel, KeywordLinkJudge, token_set
from pyramem.index import brute_force_rank
from pyramem.links import LinkBuilder
from pyramem.store import MemoryStore
from pyramem.types import ClipNode, FactNode, Link, TimeSpan


class StaticJudge:
    """Returns a fixed raw payload regardless of input."""

    def __init__(self, raw):
        self.raw = raw

    def judge(self, query_fact, candidates):
        return self.raw


def single_fact_clip(store: MemoryStore, text: str) -> FactNode:
    clip_id = store.new_clip_id()
    start = 30.0 * (len(store.state.clips))
    fid = store.new_fact_id()
    fact = FactNode(id=fid, clip_id=clip_id, span=TimeSpan(start, start),
                    text=text)
    store.add_clip(ClipNode(id=clip_id, span=TimeSpan(start, start + 30.0),
                            summary=text), [fact])
    return fact


class TestProposeCandidates:
    def test_first_fact_has_no_history(self):
        store = make_store()
        fact = single_fact_clip(store, "the very first fact")
        builder = LinkBuilder(store, StaticJudge('{"links": []}'))
        assert builder.propose_candidates(fact) == []

    def test_fewer_than_k_returns_all_ranked(self):
        store = make_store()
        single_fact_clip(store, "alpha event")
        single_fact_clip(store, "beta event")
        fact = single_fact_clip(store, "gamma event")
        builder = LinkBuilder(store, StaticJudge('{"links": []}'), k_link=5)
        candidates = builder.propose_candidates(fact)
        assert {cid for cid, _ in candidates} == {"f-1", "f-2"}
        scores = [s for _, s in candidates]
        assert scores == sorted(scores, reverse=True)

    def test_matches_brute_force_oracle_with_100_facts(self):
        store = make_store(dim=12, seed=3)
        for i in range(25):
            add_simple_clip(store, 4, text_prefix=f"group{i} item")
        new_fact = single_fact_clip(store, "the new arrival")
        builder = LinkBuilder(store, StaticJudge('{"links": []}'), k_link=10)
        got = builder.propose_candidates(new_fact)
        historical = [(fid, store.embedder.embed(f.text))
                      for fid, f in store.state.facts.items()
                      if store.fact_order(fid) < store.fact_order(new_fact.id)]
        oracle = brute_force_rank(historical,
                                  store.embedder.embed(new_fact.text))[:10]
        assert [cid for cid, _ in got] == [h.id for h in oracle]

    def test_candidates_are_strictly_historical(self):
        store = make_store()
        clip_id = store.new_clip_id()
        facts = []
        for i in range(4):
            fid = store.new_fact_id()
            facts.append(FactNode(id=fid, clip_id=clip_id,
                                  span=TimeSpan(i, i), text=f"same clip fact {i}"))
        store.add_clip(ClipNode(id=clip_id, span=TimeSpan(0, 30), summary="s"),
                       facts)
        builder = LinkBuilder(store, StaticJudge('{"links": []}'), k_link=10)
        # the second fact of the clip may only see the first, even though
        # all four are already embedded in the index
        candidates = builder.propose_candidates(facts[1])
        assert [cid for cid, _ in candidates] == [facts[0].id]


class TestJudgeAndAttach:
    def test_empty_judgment_attaches_nothing(self):
        store = make_store()
        single_fact_clip(store, "one")
        fact = single_fact_clip(store, "two")
        builder = LinkBuilder(store, StaticJudge('{"links": []}'))
        links = builder.judge_and_attach(fact, builder.propose_candidates(fact))
        assert links == []
        assert [l for l in fact.links if l.kind == "relational"] == []

    def test_keyword_judge_matches_overlap_oracle(self):
        rng = random.Random(11)
        store = make_store(dim=16, seed=1)
        words = ["kettle", "stove", "window", "garden", "pigeon", "ladder"]
        texts = [" ".join(rng.sample(words, 3)) for _ in range(30)]
        facts = [single_fact_clip(store, t) for t in texts]
        builder = LinkBuilder(store, KeywordLinkJudge(), k_link=8)
        for fact in facts[1:]:
            candidates = builder.propose_candidates(fact)
            attached = builder.judge_and_attach(fact, candidates)
            # oracle: candidates sharing at least one informative token
            expected = {cid for cid, _ in candidates
                        if token_set(store.state.facts[cid].text)
                        & token_set(fact.text)}
            assert {l.target for l in attached} == expected

    def test_hallucinated_target_dropped(self, caplog):
        store = make_store()
        single_fact_clip(store, "one")
        fact = single_fact_clip(store, "two")
        judge = StaticJudge('{"links": [{"target": "f-999", "weight": 0.5}]}')
        builder = LinkBuilder(store, judge)
        with caplog.at_level("WARNING"):
            links = builder.judge_and_attach(fact, builder.propose_candidates(fact))
        assert links == []
        assert any("f-999" in rec.message for rec in caplog.records)

    def test_unparseable_output_attaches_nothing(self, caplog):
        store = make_store()
        single_fact_clip(store, "one")
        fact = single_fact_clip(store, "two")
        builder = LinkBuilder(store, StaticJudge("i refuse to emit json"))
        with caplog.at_level("WARNING"):
            links = builder.judge_and_attach(fact, builder.propose_candidates(fact))
        assert links == []

    def test_judge_exception_never_fails_ingestion(self, caplog):
        store = make_store()
        single_fact_clip(store, "one")
        fact = single_fact_clip(store, "two")
        builder = LinkBuilder(store, FailingModel())
        with caplog.at_level("WARNING"):
            assert builder.judge_and_attach(
                fact, builder.propose_candidates(fact)) == []

    def test_weight_clamped_and_defaulted(self):
        store = make_store()
        old = single_fact_clip(store, "one")
        fact = single_fact_clip(store, "two")
        raw = json.dumps({"links": [
            {"target": old.id, "weight": 7.5, "description": "over"},
        ]})
        builder = LinkBuilder(store, StaticJudge(raw))
        links = builder.judge_and_attach(fact, builder.propose_candidates(fact))
        assert links[0].weight == 1.0
        fact2 = single_fact_clip(store, "three")
        raw2 = json.dumps({"links": [{"target": old.id}]})
        builder2 = LinkBuilder(store, StaticJudge(raw2))
        links2 = builder2.judge_and_attach(fact2,
                                           builder2.propose_candidates(fact2))
        assert links2[0].weight == 0.5  # neutral default

    def test_sparsity_bound(self):
        store = make_store()
        for i in range(20):
            single_fact_clip(store, f"shared kettle token {i}")
        fact = single_fact_clip(store, "shared kettle token new")
        builder = LinkBuilder(store, KeywordLinkJudge(), k_link=6)
        attached = builder.judge_and_attach(fact, builder.propose_candidates(fact))
        relational = [l for l in fact.links if l.kind == "relational"]
        assert len(relational) == len(attached) <= 6


class TestCrossClipInduction:
    def test_same_clip_is_noop(self):
        store = make_store()
        clip_id = store.new_clip_id()
        f1 = FactNode(id=store.new_fact_id(), clip_id=clip_id,
                      span=TimeSpan(0, 1), text="a")
        f2 = FactNode(id=store.new_fact_id(), clip_id=clip_id,
                      span=TimeSpan(1, 2), text="b")
        store.add_clip(ClipNode(id=clip_id, span=TimeSpan(0, 30), summary="s"),
                       [f1, f2])
        store.attach_links(f2.id, [Link(target=f1.id, kind="relational")])
        builder = LinkBuilder(store, StaticJudge('{"links": []}'))
        created = builder.induce_cross_clip_link(f2.links[-1], f2)
        assert created is None
        assert store.state.clips[clip_id].cross_clip_links == []

    def test_different_clips_create_one_link(self):
        store = make_store()
        f1 = single_fact_clip(store, "early")
        f2 = single_fact_clip(store, "late")
        link = Link(target=f1.id, kind="relational", weight=0.7)
        store.attach_links(f2.id, [link])
        builder = LinkBuilder(store, StaticJudge('{"links": []}'))
        created = builder.induce_cross_clip_link(link, f2)
        assert created is not None and created.weight == 0.7
        assert f2.id in created.description and f1.id in created.description
        cross = store.state.clips[f2.clip_id].cross_clip_links
        assert [l.target for l in cross] == [f1.clip_id]

    def test_two_fact_links_one_cross_link(self):
        store = make_store()
        clip1 = store.new_clip_id()
        facts1 = [FactNode(id=store.new_fact_id(), clip_id=clip1,
                           span=TimeSpan(0, 1), text=f"a{i}") for i in range(2)]
        store.add_clip(ClipNode(id=clip1, span=TimeSpan(0, 30), summary="s1"),
                       facts1)
        clip2 = store.new_clip_id()
        facts2 = [FactNode(id=store.new_fact_id(), clip_id=clip2,
                           span=TimeSpan(30, 31), text=f"b{i}") for i in range(2)]
        store.add_clip(ClipNode(id=clip2, span=TimeSpan(30, 60), summary="s2"),
                       facts2)
        builder = LinkBuilder(store, StaticJudge('{"links": []}'))
        for src, dst in [(facts2[0], facts1[0]), (facts2[1], facts1[1])]:
            link = Link(target=dst.id, kind="relational")
            store.attach_links(src.id, [link])
            builder.induce_cross_clip_link(link, src)
        # dedup oracle: distinct (source clip, target clip) pairs
        pairs = {(src.clip_id, store.state.facts[l.target].clip_id)
                 for src in store.state.facts.values()
                 for l in src.links if l.kind == "relational"}
        cross = store.state.clips[clip2].cross_clip_links
        assert len(cross) == len(pairs) == 1

    def test_cross_clip_closure_matches_recomputation(self):
        rng = random.Random(99)
        store = make_store(dim=16, seed=4)
        for i in range(8):
            add_simple_clip(store, 3, text_prefix=f"clip{i} item")
        builder = LinkBuilder(store, StaticJudge('{"links": []}'))
        fact_ids = list(store.state.facts)
        for _ in range(40):
            a, b = rng.sample(fact_ids, 2)
            link = Link(target=b, kind="relational")
            store.attach_links(a, [link])
            builder.induce_cross_clip_link(link, store.state.facts[a])
        # recomputation oracle straight from the fact graph
        expected = set()
        for fact in store.state.facts.values():
            for link in fact.links:
                if link.kind != "relational":
                    continue
                ca = fact.clip_id
                cb = store.state.facts[link.target].clip_id
                if ca != cb:
                    expected.add((ca, cb))
        got = {(cid, l.target)
               for cid, clip in store.state.clips.items()
               for l in clip.cross_clip_links}
        assert got == expected


class TestBuildForFact:
    def test_full_round_records_proposal(self):
        store = make_store()
        single_fact_clip(store, "the kettle boils")
        fact = single_fact_clip(store, "kettle steam rises")
        builder = LinkBuilder(store, KeywordLinkJudge())
        proposal = builder.build_for_fact(fact)
        assert proposal.source == fact.id
        assert {cid for cid, _ in proposal.candidates} == {"f-1"}
        assert [l.target for l in proposal.judged] == ["f-1"]
        # judged targets always drawn from candidates
        assert {l.target for l in proposal.judged} <= {c for c, _ in
                                                       proposal.candidates}
        # induced cross-clip link exists (different clips)
        assert store.state.clips[fact.clip_id].cross_clip_links
