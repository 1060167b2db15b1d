import numpy as np
import pytest

from diarloop.enrollment import EnrollmentPool, assign_speaker
from diarloop.errors import (
    DegenerateEmbeddingError,
    NoEnrollmentsError,
    UnknownSpeakerError,
)
from diarloop.model import normalize


def vec(*xs):
    return np.array(xs, dtype=np.float64)


def pool_of(seeds, cap=1):
    return EnrollmentPool.from_seeds(seeds, online_cap=cap)


class TestAssignSpeaker:
    def test_closest_seed_wins(self):
        pool = pool_of({"A": [vec(1, 0)], "B": [vec(0, 1)]})
        trace = assign_speaker(vec(0.8, 0.6), pool)
        assert trace.chosen == "A"
        assert trace.scores["A"] == pytest.approx(0.8)
        assert trace.scores["B"] == pytest.approx(0.6)

    def test_tie_breaks_lexicographic(self):
        pool = pool_of({"B": [vec(1, 0)], "A": [vec(1, 0)]})
        assert assign_speaker(vec(1, 0), pool).chosen == "A"

    def test_max_over_pool_semantics(self):
        pool = pool_of({"A": [vec(1, 0)], "B": [vec(0, 1)]}, cap=2)
        pool = pool.enroll_online("B", vec(0.6, 0.8))
        trace = assign_speaker(vec(0.6, 0.8), pool)
        assert trace.chosen == "B"
        assert trace.scores["B"] == pytest.approx(1.0)
        assert trace.scores["A"] == pytest.approx(0.6)

    def test_empty_pool_rejected(self):
        with pytest.raises(NoEnrollmentsError):
            EnrollmentPool.from_seeds({})
        with pytest.raises(NoEnrollmentsError):
            EnrollmentPool.from_seeds({"A": []})

    def test_degenerate_query(self):
        pool = pool_of({"A": [vec(1, 0)]})
        with pytest.raises(DegenerateEmbeddingError):
            assign_speaker(vec(0, 0), pool)

    def test_scale_invariance(self):
        rng = np.random.default_rng(5)
        pool = pool_of({"A": [rng.normal(size=4)], "B": [rng.normal(size=4)]})
        for _ in range(50):
            q = rng.normal(size=4)
            chosen = assign_speaker(q, pool).chosen
            assert assign_speaker(q * 37.5, pool).chosen == chosen
        scaled = pool_of(
            {s: [m * 0.003 for m in pool.members(s)] for s in pool.speakers()}
        )
        for _ in range(50):
            q = rng.normal(size=4)
            assert assign_speaker(q, scaled).chosen == assign_speaker(q, pool).chosen


class TestEnrollOnline:
    def test_fifo_at_capacity_one(self):
        pool = pool_of({"A": [vec(1, 0)]}, cap=1)
        x, y = vec(0.9, 0.1), vec(0.8, 0.2)
        pool = pool.enroll_online("A", x).enroll_online("A", y)
        assert len(pool.online["A"]) == 1
        assert np.allclose(pool.online["A"][0], normalize(y))

    def test_below_capacity_appends(self):
        pool = pool_of({"A": [vec(1, 0)]}, cap=2)
        pool = pool.enroll_online("A", vec(0.9, 0.1)).enroll_online("A", vec(0.8, 0.2))
        assert len(pool.online["A"]) == 2

    def test_capacity_zero_noop(self):
        pool = pool_of({"A": [vec(1, 0)]}, cap=0)
        assert pool.enroll_online("A", vec(0.5, 0.5)) is pool

    def test_unknown_speaker(self):
        pool = pool_of({"A": [vec(1, 0)]})
        with pytest.raises(UnknownSpeakerError):
            pool.enroll_online("Z", vec(1, 0))

    def test_seeds_never_evicted(self):
        pool = pool_of({"A": [vec(1, 0)]}, cap=1)
        for i in range(5):
            pool = pool.enroll_online("A", vec(1.0, 0.1 * i))
        assert len(pool.seeds["A"]) == 1
        assert len(pool.online["A"]) == 1

    def test_old_pool_unchanged(self):
        pool = pool_of({"A": [vec(1, 0)], "B": [vec(0, 1)]}, cap=1)
        before = assign_speaker(vec(0.6, 0.8), pool)
        updated = pool.enroll_online("A", vec(0.6, 0.8))
        assert pool.online["A"] == ()
        assert updated.revision == pool.revision + 1
        # prior decisions are reproducible from the old pool
        again = assign_speaker(vec(0.6, 0.8), pool)
        assert again == before
        assert assign_speaker(vec(0.6, 0.8), updated).chosen == "A"


def test_enrolling_true_samples_never_hurts_aggregate():
    """Separable clusters: an in-situ enrollment cannot reduce overall
    accuracy on later queries (aggregated over many seeded trials)."""
    rng = np.random.default_rng(42)
    dim = 16
    correct_without = 0
    correct_with = 0
    for _ in range(120):
        gauss = rng.normal(size=(dim, dim))
        q, _ = np.linalg.qr(gauss)
        centroids = {spk: q[:, i] for i, spk in enumerate("ABC")}

        def sample(spk):
            return normalize(centroids[spk] + 0.06 * rng.normal(size=dim))

        seeds = {spk: [sample(spk)] for spk in "ABC"}
        inter = max(
            abs(float(np.dot(normalize(seeds[a][0]), normalize(seeds[b][0]))))
            for a in "ABC"
            for b in "ABC"
            if a < b
        )
        within = min(
            float(np.dot(normalize(sample(s)), normalize(centroids[s]))) for s in "ABC"
        )
        assert inter < 0.5 and within > 0.9

        base = EnrollmentPool.from_seeds(seeds, online_cap=1)
        enrolled = base.enroll_online("A", sample("A"))
        queries = [(spk, sample(spk)) for spk in "ABC" for _ in range(10)]
        correct_without += sum(
            assign_speaker(e, base).chosen == spk for spk, e in queries
        )
        correct_with += sum(
            assign_speaker(e, enrolled).chosen == spk for spk, e in queries
        )
    assert correct_with >= correct_without
