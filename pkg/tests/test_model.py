import numpy as np
import pytest

from diarloop.errors import DegenerateEmbeddingError, ValidationError
from diarloop.model import (
    ReferenceAnnotation,
    Revision,
    Segment,
    SessionConfig,
    Transcript,
    Word,
    cosine,
    merge_intervals,
    normalize,
)


def seg(sid="s1", start=0.0, end=2.0, words=None, **kw):
    if words is None:
        words = [Word("hello", 0.0, 1.0), Word("there", 1.0, 2.0)]
    return Segment(id=sid, t_start=start, t_end=end, words=words, **kw)


class TestEmbeddingMath:
    def test_normalize_three_four(self):
        assert np.allclose(normalize(np.array([3.0, 4.0])), [0.6, 0.8])

    def test_normalize_unit_identity(self):
        v = np.array([0.0, 1.0])
        assert np.allclose(normalize(v), v)

    def test_normalize_zero_raises(self):
        with pytest.raises(DegenerateEmbeddingError):
            normalize(np.array([0.0, 0.0]))

    def test_normalize_nonfinite_raises(self):
        with pytest.raises(DegenerateEmbeddingError):
            normalize(np.array([1.0, np.nan]))

    def test_cosine_identical(self):
        v = np.array([1.0, 0.0])
        assert cosine(v, v) == pytest.approx(1.0)

    def test_cosine_orthogonal(self):
        assert cosine(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(0.0)

    def test_cosine_direct(self):
        assert cosine(np.array([1.0, 0.0]), np.array([0.8, 0.6])) == pytest.approx(0.8)

    def test_cosine_bounds_and_symmetry(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            a = rng.normal(size=8) * rng.uniform(0.01, 100)
            b = rng.normal(size=8) * rng.uniform(0.01, 100)
            c_ab = cosine(a, b)
            assert abs(c_ab) <= 1.0 + 1e-9
            assert c_ab == pytest.approx(cosine(b, a), abs=1e-12)


class TestSegment:
    def test_word_containment_tolerance(self):
        # 50 ms of jitter is absorbed, more is not
        seg(words=[Word("w", -0.04, 1.0)]).validate()
        with pytest.raises(ValidationError):
            seg(words=[Word("w", -0.06, 1.0)]).validate()

    def test_words_sorted(self):
        with pytest.raises(ValidationError):
            seg(words=[Word("b", 1.0, 2.0), Word("a", 0.0, 1.0)]).validate()

    def test_start_after_end(self):
        with pytest.raises(ValidationError):
            Segment(id="x", t_start=2.0, t_end=1.0, words=[]).validate()

    def test_text_joins_words(self):
        assert seg().text == "hello there"

    def test_word_invariants(self):
        with pytest.raises(ValidationError):
            Word("", 0.0, 1.0)
        with pytest.raises(ValidationError):
            Word("x", 2.0, 1.0)


class TestTranscript:
    def test_append_only_under_revisions(self):
        t = Transcript()
        s1 = seg("a", label="A")
        s2 = seg("b", start=2.0, end=4.0, words=[Word("hi", 2.0, 4.0)], label="B")
        t.append(s1, 0)
        t.append(s2, 1)
        before = [(s.id, s.t_start, s.t_end, tuple(s.words)) for s in t.segments()]
        t.apply_revision(Revision("a", "A", "B", "user", 2))
        after = [(s.id, s.t_start, s.t_end, tuple(s.words)) for s in t.segments()]
        assert before == after
        assert t.find("a").label == "B"
        assert len(t.revisions) == 1

    def test_revision_unknown_segment(self):
        t = Transcript()
        with pytest.raises(ValidationError):
            t.apply_revision(Revision("nope", "A", "B", "user", 0))

    def test_revision_must_change_speaker(self):
        with pytest.raises(ValidationError):
            Revision("a", "A", "A", "user", 0)

    def test_lines(self):
        t = Transcript()
        t.append(seg("a", label="A"), 0)
        assert t.lines() == ["A: hello there"]


class TestReferenceAnnotation:
    def test_positive_duration(self):
        with pytest.raises(ValidationError):
            ReferenceAnnotation(intervals=((0.0, 0.0, "A"),))

    def test_by_speaker_merges(self):
        ref = ReferenceAnnotation(intervals=((0.0, 5.0, "A"), (4.0, 4.0, "A")))
        assert ref.by_speaker() == {"A": [(0.0, 8.0)]}

    def test_overlap(self):
        ref = ReferenceAnnotation(intervals=((0.0, 10.0, "A"),))
        assert ref.overlap("A", 5.0, 20.0) == pytest.approx(5.0)
        assert ref.overlap("B", 0.0, 10.0) == 0.0


class TestSessionConfig:
    def test_defaults(self):
        cfg = SessionConfig()
        assert cfg.swm_window_s == 1.0
        assert cfg.swm_stride_s == 0.2
        assert cfg.dominance == 0.7
        assert cfg.summary_interval == 15
        assert cfg.correction_limit == 30
        assert cfg.display_mode == "summary"

    def test_oe_cap_depends_on_swm(self):
        cfg = SessionConfig()
        assert cfg.resolved_oe_cap(swm_enabled=True) == 1
        assert cfg.resolved_oe_cap(swm_enabled=False) == 2
        assert SessionConfig(max_online_enrollments=4).resolved_oe_cap(True) == 4

    def test_context_defaults_to_interval(self):
        assert SessionConfig(summary_interval=10).resolved_context_turns() == 10
        assert SessionConfig(correction_context_turns=3).resolved_context_turns() == 3

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"swm_window_s": 0.0},
            {"swm_stride_s": 0.0},
            {"swm_stride_s": 1.5},
            {"dominance": 0.0},
            {"dominance": 1.0001},
            {"summary_interval": 0},
            {"correction_limit": -1},
            {"max_online_enrollments": -1},
            {"display_mode": "both"},
        ],
    )
    def test_invalid_configs(self, kwargs):
        with pytest.raises(ValidationError):
            SessionConfig(**kwargs)


def test_merge_intervals_gap():
    assert merge_intervals([(0.0, 1.0), (1.005, 2.0)], gap=0.01) == [(0.0, 2.0)]
    assert merge_intervals([(0.0, 1.0), (1.5, 2.0)]) == [(0.0, 1.0), (1.5, 2.0)]
