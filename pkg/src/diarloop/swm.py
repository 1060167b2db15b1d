"""Split-when-merged: repair single segments that span multiple speakers.

Sliding windows over the segment each cast a speaker vote; votes are
binned to the nearest word midpoint and smoothed into one label per
word. If no speaker dominates the word labels, the segment is split
once at the index that maximizes left+right majority agreement.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ValidationError
from .model import Segment, SessionConfig, SpeakerId

# provider(segment, window_start, window_end) -> vote
VoteProvider = Callable[[Segment, float, float], SpeakerId]

STEP_TOLERANCE_S = 1e-9

UNSPLIT_DOMINANCE = "dominance"
UNSPLIT_SAME_MAJORITY = "same-majority"
UNSPLIT_DEGENERATE_INDEX = "degenerate-index"
UNSPLIT_NO_VOTES = "no-votes"
UNSPLIT_SINGLE_WORD = "single-word"


@dataclass(frozen=True)
class WindowVote:
    at: float  # window end time
    speaker: SpeakerId


@dataclass(frozen=True)
class WordLabeling:
    labels: tuple[SpeakerId, ...]
    bins: tuple[tuple[SpeakerId, ...], ...]


@dataclass(frozen=True)
class SplitResult:
    split: bool
    reason: str | None = None
    left: Segment | None = None
    right: Segment | None = None
    split_index: int | None = None  # words 1..i go left (1-based)
    left_speaker: SpeakerId | None = None
    right_speaker: SpeakerId | None = None

    @staticmethod
    def unsplit(reason: str, **diag) -> "SplitResult":
        return SplitResult(split=False, reason=reason, **diag)


def collect_votes(
    segment: Segment, provider: VoteProvider, window_s: float, stride_s: float
) -> list[WindowVote]:
    """One vote per full window [t-W, t], t stepping by the stride.

    Segments shorter than the window yield no votes; that is not an
    error, the caller treats it as an unsplittable segment.
    """
    if window_s <= 0 or stride_s <= 0:
        raise ValidationError("window and stride must be positive")
    votes: list[WindowVote] = []
    k = 0
    while True:
        t = segment.t_start + window_s + k * stride_s
        if t > segment.t_end + STEP_TOLERANCE_S:
            break
        votes.append(WindowVote(at=t, speaker=provider(segment, t - window_s, t)))
        k += 1
    return votes


def _mode(bin_votes_list: list[SpeakerId]) -> SpeakerId:
    counts: dict[SpeakerId, int] = {}
    for v in bin_votes_list:
        counts[v] = counts.get(v, 0) + 1
    best = max(counts.values())
    return min(s for s, c in counts.items() if c == best)


def bin_votes(segment: Segment, votes: list[WindowVote]) -> WordLabeling:
    """Assign votes to nearest word midpoints and derive per-word labels.

    Midpoint-distance ties go to the earlier word. Each non-empty bin's
    label is its vote mode (ties: lexicographically smallest speaker);
    empty bins inherit the label of the nearest labeled word by index,
    again preferring the earlier word on ties.
    """
    if not segment.words:
        raise ValidationError("segment has no words", location=segment.id)
    if not votes:
        raise ValidationError("no votes to bin", location=segment.id)

    mids = [w.midpoint for w in segment.words]
    bins: list[list[SpeakerId]] = [[] for _ in segment.words]
    for vote in votes:
        nearest = min(range(len(mids)), key=lambda k: (abs(mids[k] - vote.at), k))
        bins[nearest].append(vote.speaker)

    labels: list[SpeakerId | None] = [
        _mode(b) if b else None for b in bins
    ]
    filled = [k for k, lab in enumerate(labels) if lab is not None]
    for k, lab in enumerate(labels):
        if lab is None:
            src = min(filled, key=lambda j: (abs(j - k), j))
            labels[k] = labels[src]

    return WordLabeling(labels=tuple(labels), bins=tuple(tuple(b) for b in bins))


def split_when_merged(
    segment: Segment, labeling: WordLabeling, theta: float
) -> SplitResult:
    """Split the segment in two if its word labels show two majorities.

    A single speaker holding at least ``theta`` of the word labels
    suppresses the split. Otherwise the cut index maximizes the count
    of words matching the left majority plus words matching the right
    majority; ties go to the smallest index, majority ties to the
    lexicographically smallest speaker. At most one split per segment.
    """
    labels = labeling.labels
    n = len(labels)
    if n != len(segment.words):
        raise ValidationError("labeling does not cover the words", location=segment.id)

    counts: dict[SpeakerId, int] = {}
    for lab in labels:
        counts[lab] = counts.get(lab, 0) + 1
    dominant = max(counts.values()) / n
    if dominant >= theta:
        return SplitResult.unsplit(UNSPLIT_DOMINANCE)
    if n == 1:
        return SplitResult.unsplit(UNSPLIT_SINGLE_WORD)

    speakers = sorted(counts)
    left_counts = {s: 0 for s in speakers}
    right_counts = dict(counts)
    best_score = -1
    best_i = 0
    best_left: SpeakerId | None = None
    best_right: SpeakerId | None = None
    for i in range(1, n):  # words 1..i left, i+1..n right
        lab = labels[i - 1]
        left_counts[lab] += 1
        right_counts[lab] -= 1
        l_best = max(left_counts.values())
        r_best = max(v for v in right_counts.values())
        score = l_best + r_best
        if score > best_score:
            best_score = score
            best_i = i
            best_left = min(s for s in speakers if left_counts[s] == l_best)
            best_right = min(s for s in speakers if right_counts[s] == r_best)

    if best_left is None or best_i in (0, n):
        return SplitResult.unsplit(UNSPLIT_DEGENERATE_INDEX)
    if best_left == best_right:
        return SplitResult.unsplit(
            UNSPLIT_SAME_MAJORITY,
            split_index=best_i,
            left_speaker=best_left,
            right_speaker=best_right,
        )

    left_words = list(segment.words[:best_i])
    right_words = list(segment.words[best_i:])
    left = Segment(
        id=f"{segment.id}.L",
        t_start=left_words[0].start,
        t_end=left_words[-1].end,
        words=left_words,
        embedding=segment.embedding,
        label=best_left,
        parent_id=segment.id,
    )
    right = Segment(
        id=f"{segment.id}.R",
        t_start=right_words[0].start,
        t_end=right_words[-1].end,
        words=right_words,
        embedding=segment.embedding,
        label=best_right,
        parent_id=segment.id,
    )
    return SplitResult(
        split=True,
        left=left,
        right=right,
        split_index=best_i,
        left_speaker=best_left,
        right_speaker=best_right,
    )


def apply_swm(
    segment: Segment, provider: VoteProvider, cfg: SessionConfig
) -> tuple[SplitResult, list[WindowVote]]:
    """Full pipeline for one segment: vote, bin, decide."""
    if not segment.words:
        return SplitResult.unsplit(UNSPLIT_NO_VOTES), []
    votes = collect_votes(segment, provider, cfg.swm_window_s, cfg.swm_stride_s)
    if not votes:
        return SplitResult.unsplit(UNSPLIT_NO_VOTES), []
    labeling = bin_votes(segment, votes)
    return split_when_merged(segment, labeling, cfg.dominance), votes


class PrecomputedVoteProvider:
    """Serve votes stored alongside ingested segments.

    Stored votes are keyed by window end time; the run's window/stride
    must match the grid the votes were generated on.
    """

    def __init__(self, votes_by_segment: dict[str, list[tuple[float, SpeakerId]]]):
        self.votes_by_segment = votes_by_segment

    def __call__(self, segment: Segment, a: float, b: float) -> SpeakerId:
        stored = self.votes_by_segment.get(segment.id)
        if not stored:
            raise ValidationError("no stored votes for segment", location=segment.id)
        t, speaker = min(stored, key=lambda item: abs(item[0] - b))
        if abs(t - b) > 1e-6:
            raise ValidationError(
                f"stored votes misaligned with window grid (wanted {b}, nearest {t})",
                location=segment.id,
            )
        return speaker


class ReferenceVoteProvider:
    """Synthetic votes from ground-truth intervals with label noise.

    The clean vote is the reference speaker with the largest overlap in
    the window (no overlap: the speaker of the nearest interval). With
    probability ``noise_rate`` the vote flips to a random other speaker.
    """

    def __init__(self, reference, speakers: list[SpeakerId], noise_rate: float = 0.0, seed: int = 0):
        self.intervals = sorted(
            (start, start + dur, spk) for start, dur, spk in reference.intervals
        )
        self.starts = [iv[0] for iv in self.intervals]
        self.max_len = max((e - s for s, e, _ in self.intervals), default=0.0)
        self.speakers = sorted(speakers)
        self.noise_rate = noise_rate
        self.rng = np.random.default_rng(seed)

    def _clean_vote(self, a: float, b: float) -> SpeakerId:
        hi = bisect.bisect_left(self.starts, b)
        overlaps: dict[SpeakerId, float] = {}
        idx = hi - 1
        while idx >= 0 and self.starts[idx] > a - self.max_len:
            start, end, spk = self.intervals[idx]
            got = min(end, b) - max(start, a)
            if got > 0:
                overlaps[spk] = overlaps.get(spk, 0.0) + got
            idx -= 1
        if overlaps:
            best = max(overlaps.values())
            return min(s for s, v in overlaps.items() if v == best)
        center = (a + b) / 2.0
        nearest = min(
            self.intervals,
            key=lambda iv: (abs((iv[0] + iv[1]) / 2.0 - center), iv[2]),
        )
        return nearest[2]

    def __call__(self, segment: Segment, a: float, b: float) -> SpeakerId:
        vote = self._clean_vote(a, b)
        if self.noise_rate > 0 and self.rng.random() < self.noise_rate:
            others = [s for s in self.speakers if s != vote]
            if others:
                vote = others[self.rng.integers(len(others))]
        return vote


class PoolVoteProvider:
    """Embedding-backed votes: look up a window embedding, match the pool.

    ``lookup(a, b)`` must return an embedding for the window span;
    ``pool_getter`` reads the live enrollment pool so votes track online
    enrollments causally.
    """

    def __init__(self, lookup, pool_getter):
        self.lookup = lookup
        self.pool_getter = pool_getter

    def __call__(self, segment: Segment, a: float, b: float) -> SpeakerId:
        from .enrollment import assign_speaker

        return assign_speaker(self.lookup(a, b), self.pool_getter(), segment.id).chosen
