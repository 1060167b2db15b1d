import numpy as np
import pytest

from diarloop.engine import Engine, Toggles
from diarloop.enrollment import EnrollmentPool
from diarloop.gateway import RuleBasedGateway
from diarloop.model import Segment, SessionConfig, Word
from diarloop.swm import PoolVoteProvider


def words_for(text, start, end):
    tokens = text.split()
    step = (end - start) / len(tokens)
    return [
        Word(tok, start + i * step, start + (i + 1) * step)
        for i, tok in enumerate(tokens)
    ]


def segment(sid, text, start, end, embedding=None):
    return Segment(
        id=sid,
        t_start=start,
        t_end=end,
        words=words_for(text, start, end),
        embedding=None if embedding is None else np.asarray(embedding, dtype=float),
    )


@pytest.fixture()
def lookup_engine():
    """Engine with a windowed embedding source: [0,2] sounds like A,
    (2,4] sounds like B. Exercises the embedding-based vote provider
    and the sub-segment re-fetch path."""
    pool = EnrollmentPool.from_seeds(
        {"A": [np.array([1.0, 0.0])], "B": [np.array([0.0, 1.0])]}, online_cap=1
    )

    def lookup(a, b):
        mid = (a + b) / 2.0
        return np.array([1.0, 0.0]) if mid <= 2.0 else np.array([0.0, 1.0])

    engine = Engine(
        cfg=SessionConfig(summary_interval=50, display_mode="conversation"),
        pool=pool,
        gateway=RuleBasedGateway(),
        toggles=Toggles(swm=True, oe=True, corrections=True),
        vote_provider=None,
        embedding_lookup=lookup,
    )
    engine.vote_provider = PoolVoteProvider(lookup, lambda: engine.pool)
    return engine


class TestEmbeddingBackedVotes:
    def test_split_children_reassigned_from_lookup(self, lookup_engine):
        merged = segment("m", "a b c d e f g h", 0.0, 4.0, embedding=[0.7, 0.7])
        events = lookup_engine.push_segment(merged)
        assert [e["kind"] for e in events] == ["segment", "segment"]
        left, right = (e["payload"]["segment"] for e in events)
        assert left["label"] == "A" and right["label"] == "B"
        # children carry their own re-fetched embeddings
        assert left["embedding"] == [1.0, 0.0]
        assert right["embedding"] == [0.0, 1.0]

    def test_votes_follow_pool_updates(self, lookup_engine):
        # after enrolling the lookup vector for B under speaker A, votes
        # in the late window flip to A: the provider reads the live pool
        lookup_engine.push_segment(segment("s1", "x y", 0.0, 1.0, embedding=[1, 0]))
        provider = lookup_engine.vote_provider
        probe = segment("probe", "z", 3.0, 4.0)
        assert provider(probe, 3.0, 4.0) == "B"
        lookup_engine.pool = lookup_engine.pool.enroll_online(
            "A", np.array([0.0, 1.0])
        )
        assert provider(probe, 3.0, 4.0) == "A"


class TestEngineGuards:
    def engine(self, **kw):
        pool = EnrollmentPool.from_seeds(
            {"A": [np.array([1.0, 0.0])], "B": [np.array([0.0, 1.0])]}, online_cap=1
        )
        return Engine(
            cfg=kw.pop(
                "cfg", SessionConfig(summary_interval=50, display_mode="conversation")
            ),
            pool=pool,
            gateway=RuleBasedGateway(),
            toggles=kw.pop("toggles", Toggles(swm=False, oe=True, corrections=True)),
        )

    def test_segment_without_embedding_or_label_rejected(self):
        engine = self.engine()
        events = engine.push_segment(segment("s", "hi", 0.0, 1.0))
        assert [e["kind"] for e in events] == ["error"]
        assert engine.transcript.segments() == []

    def test_prelabeled_segment_accepted(self):
        engine = self.engine()
        seg = segment("s", "hi", 0.0, 1.0)
        seg.label = "A"
        events = engine.push_segment(seg)
        assert [e["kind"] for e in events] == ["segment"]

    def test_invalid_segment_rejected(self):
        engine = self.engine()
        bad = Segment(
            id="s", t_start=0.0, t_end=1.0, words=[Word("x", 5.0, 6.0)],
            embedding=np.array([1.0, 0.0]),
        )
        events = engine.push_segment(bad)
        assert [e["kind"] for e in events] == ["error"]
        assert "outside segment bounds" in events[0]["payload"]["message"]

    def test_loop_disabled_feedback_errors(self):
        engine = self.engine(toggles=Toggles(swm=False, oe=False, corrections=False))
        events = engine.push_feedback("Hey COBI: anything")
        assert events[0]["payload"]["stage"] == "disabled"

    def test_parse_failure_does_not_consume_budget(self):
        engine = self.engine(
            cfg=SessionConfig(
                summary_interval=50, display_mode="conversation", correction_limit=2
            )
        )
        engine.push_segment(segment("s", "hello world", 0.0, 1.0, embedding=[1, 0]))
        events = engine.push_feedback("Hey COBI: gibberish with no structure")
        assert events[0]["payload"]["stage"] == "parse"
        assert engine.loop.corrections_used == 0
        assert engine.loop.budget_left

    def test_zero_limit_emits_limit_reached_once(self):
        engine = self.engine(
            cfg=SessionConfig(
                summary_interval=50, display_mode="conversation", correction_limit=0
            )
        )
        engine.push_segment(segment("s", "hello world", 0.0, 1.0, embedding=[1, 0]))
        first = engine.push_feedback(
            "Hey COBI: Predicted A, saying hello world, was actually B."
        )
        assert [e["kind"] for e in first] == ["limit-reached"]
        second = engine.push_feedback(
            "Hey COBI: Predicted A, saying hello world, was actually B."
        )
        assert second == []
        assert engine.transcript.segments()[0].label == "A"
