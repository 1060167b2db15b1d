"""Deterministic synthetic meetings for simulation and tests.

Speakers get orthogonal in-situ embedding centroids but deliberately
drifted seed enrollments. Assignment errors then come from two places:
segments hit by a recurring per-speaker "channel excursion" (the same
voice under a shifted acoustic condition, which the drifted seeds no
longer match) and merge events that fuse adjacent different-speaker
turns into one segment with a mixed embedding. Excursion segments are
still genuine samples of their speaker, so enrolling one online repairs
the rest; mixed merge embeddings are not, so enrolling those pollutes
the pool. Window votes derive from the reference with label noise.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

import numpy as np

from .bundles import MeetingBundle
from .errors import GenerationError
from .model import ReferenceAnnotation, Segment, Word, normalize
from .swm import ReferenceVoteProvider, collect_votes


def _lexicon() -> list[str]:
    consonants = "bdfklmnprstvz"
    vowels = "aeiou"
    syllables = [c + v for c, v in itertools.product(consonants, vowels)]
    words = [a + b for a, b in itertools.product(syllables, syllables)]
    return words[:600]


LEXICON = _lexicon()


@dataclass(frozen=True)
class SynthParams:
    n_speakers: int = 4
    duration_s: float = 600.0
    turn_min_s: float = 2.0
    turn_max_s: float = 8.0
    gap_min_s: float = 0.1
    gap_max_s: float = 0.8
    words_per_s: float = 2.5
    dim: int = 16
    cluster_spread: float = 0.05
    seed_drift_min: float = 0.4
    seed_drift_max: float = 1.1
    merge_rate: float = 0.0
    vote_noise: float = 0.05
    confusion_rate: float = 0.0
    excursion_scale: float = 1.5
    window_s: float = 1.0
    stride_s: float = 0.2
    seed: int = 0
    meeting_id: str = ""

    def validate(self) -> None:
        if not 2 <= self.n_speakers <= 6:
            raise GenerationError("speaker count must be between 2 and 6")
        if self.turn_min_s <= 0 or self.turn_max_s < self.turn_min_s:
            raise GenerationError("bad turn length range")
        if self.turn_min_s > self.duration_s:
            raise GenerationError("turn length exceeds meeting duration")
        if self.dim < 4:
            raise GenerationError("embedding dimension too small")
        for name in ("merge_rate", "vote_noise", "confusion_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise GenerationError(f"{name} must be in [0, 1]")
        if self.seed_drift_min < 0 or self.seed_drift_max < self.seed_drift_min:
            raise GenerationError("bad seed drift range")


def _orthogonal_centroids(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    gauss = rng.normal(size=(dim, dim))
    q, _ = np.linalg.qr(gauss)
    return q[:, :n].T.copy()


def _unit_orthogonal(rng: np.random.Generator, centroid: np.ndarray) -> np.ndarray:
    direction = rng.normal(size=centroid.shape)
    direction -= np.dot(direction, centroid) * centroid
    return normalize(direction)


def _drifted_seed(
    rng: np.random.Generator, centroid: np.ndarray, drift: float
) -> np.ndarray:
    return normalize(centroid + drift * _unit_orthogonal(rng, centroid))


def synth_meeting(params: SynthParams) -> MeetingBundle:
    """Generate one meeting bundle, fully determined by the seed."""
    params.validate()
    rng = np.random.default_rng(params.seed)
    speakers = [chr(ord("A") + i) for i in range(params.n_speakers)]

    centroids = {
        spk: normalize(vec)
        for spk, vec in zip(
            speakers, _orthogonal_centroids(rng, params.n_speakers, params.dim)
        )
    }
    # regenerate drifted seeds until every cross-speaker score stays low
    for _ in range(200):
        drifts = {
            spk: rng.uniform(params.seed_drift_min, params.seed_drift_max)
            for spk in speakers
        }
        seeds = {
            spk: _drifted_seed(rng, centroids[spk], drifts[spk]) for spk in speakers
        }
        cross = max(
            abs(float(np.dot(centroids[a], seeds[b])))
            for a in speakers
            for b in speakers
            if a != b
        )
        seed_cross = max(
            (
                abs(float(np.dot(seeds[a], seeds[b])))
                for a in speakers
                for b in speakers
                if a < b
            ),
            default=0.0,
        )
        if cross < 0.45 and seed_cross < 0.5:
            break
    else:
        raise GenerationError("could not place separable seed embeddings")

    # script the reference turns, alternating speakers
    turns: list[tuple[str, float, float, list[Word]]] = []
    t = rng.uniform(params.gap_min_s, params.gap_max_s)
    prev_spk: str | None = None
    while True:
        turn_len = rng.uniform(params.turn_min_s, params.turn_max_s)
        if t + turn_len > params.duration_s:
            break
        choices = [s for s in speakers if s != prev_spk]
        spk = choices[rng.integers(len(choices))]
        n_words = max(1, int(round(turn_len * params.words_per_s)))
        edges = np.linspace(t, t + turn_len, n_words + 1)
        words = [
            Word(
                text=LEXICON[rng.integers(len(LEXICON))],
                start=float(edges[i]),
                end=float(edges[i + 1]),
            )
            for i in range(n_words)
        ]
        turns.append((spk, t, t + turn_len, words))
        prev_spk = spk
        t += turn_len + rng.uniform(params.gap_min_s, params.gap_max_s)
    if not turns:
        raise GenerationError("parameters produce an empty meeting")

    reference = ReferenceAnnotation(
        intervals=tuple((start, end - start, spk) for spk, start, end, _ in turns)
    )
    truth_lines = [
        f"{spk}: {' '.join(w.text for w in words)}" for spk, _, _, words in turns
    ]

    def jitter(base: np.ndarray) -> np.ndarray:
        return normalize(base + params.cluster_spread * rng.normal(size=params.dim))

    # one recurring shifted acoustic condition per speaker per meeting:
    # the speaker's voice leans toward another speaker's enrollment, so
    # seed matching misfires until an in-situ sample is enrolled
    partners = {
        spk: [s for s in speakers if s != spk][
            rng.integers(params.n_speakers - 1)
        ]
        for spk in speakers
    }
    excursions = {
        spk: centroids[spk] + params.excursion_scale * seeds[partners[spk]]
        for spk in speakers
    }

    segments: list[Segment] = []
    i = 0
    seg_idx = 0
    while i < len(turns):
        merge = i + 1 < len(turns) and rng.random() < params.merge_rate
        if merge:
            spk_a, start_a, end_a, words_a = turns[i]
            spk_b, start_b, end_b, words_b = turns[i + 1]
            weight = (end_a - start_a) / ((end_a - start_a) + (end_b - start_b))
            base = weight * centroids[spk_a] + (1.0 - weight) * centroids[spk_b]
            seg = Segment(
                id=f"seg-{seg_idx:04d}",
                t_start=start_a,
                t_end=end_b,
                words=words_a + words_b,
                embedding=jitter(base),
            )
            i += 2
        else:
            spk, start, end, words = turns[i]
            base = centroids[spk]
            if params.confusion_rate > 0 and rng.random() < params.confusion_rate:
                base = excursions[spk]
            seg = Segment(
                id=f"seg-{seg_idx:04d}",
                t_start=start,
                t_end=end,
                words=words,
                embedding=jitter(base),
            )
            i += 1
        segments.append(seg)
        seg_idx += 1

    vote_provider = ReferenceVoteProvider(
        reference,
        speakers,
        noise_rate=params.vote_noise,
        seed=int(rng.integers(2**31)),
    )
    votes = {
        seg.id: [
            (v.at, v.speaker)
            for v in collect_votes(seg, vote_provider, params.window_s, params.stride_s)
        ]
        for seg in segments
    }

    bundle = MeetingBundle(
        meeting_id=params.meeting_id or f"synth-{params.seed:04d}",
        speakers=speakers,
        dim=params.dim,
        segments=segments,
        reference=reference,
        seeds={spk: [seeds[spk]] for spk in speakers},
        votes=votes,
        truth_lines=truth_lines,
    )
    bundle.validate()
    return bundle


def standard_suite(
    n_meetings: int = 20,
    n_speakers: int = 4,
    duration_s: float = 600.0,
    merge_rate: float = 0.25,
    confusion_rate: float = 0.15,
    base_seed: int = 100,
) -> list[MeetingBundle]:
    """The fixed evaluation suite: seeded meetings with merge events and
    embedding confusion at the standard rates."""
    bundles = []
    base = SynthParams(
        n_speakers=n_speakers,
        duration_s=duration_s,
        merge_rate=merge_rate,
        confusion_rate=confusion_rate,
    )
    for i in range(n_meetings):
        bundles.append(synth_meeting(replace(base, seed=base_seed + i)))
    return bundles
