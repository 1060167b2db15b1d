"""Shared domain types: words, segments, transcripts, and embedding math.

Times are seconds as floats; causal ordering uses logical indices, not
wall-clock time. Embeddings are 1-D numpy arrays of a per-session fixed
dimension.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateEmbeddingError, ValidationError

# ASR word timestamps may stick out of their segment by a few ms.
WORD_TIME_TOLERANCE_S = 0.05

SpeakerId = str
Embedding = np.ndarray


def normalize(e: Embedding) -> Embedding:
    """Return the unit-norm copy of ``e``.

    Raises DegenerateEmbeddingError for zero-norm or non-finite input.
    """
    e = np.asarray(e, dtype=np.float64)
    if e.ndim != 1 or not np.all(np.isfinite(e)):
        raise DegenerateEmbeddingError("embedding must be a finite 1-D vector")
    norm = float(np.linalg.norm(e))
    if norm <= 0.0:
        raise DegenerateEmbeddingError("embedding has zero norm")
    return e / norm


def cosine(a: Embedding, b: Embedding) -> float:
    """Cosine similarity in [-1, 1] between two non-degenerate vectors."""
    return float(np.dot(normalize(a), normalize(b)))


@dataclass(frozen=True)
class Word:
    text: str
    start: float
    end: float

    def __post_init__(self):
        if not self.text.strip():
            raise ValidationError("word text is empty")
        if self.start > self.end:
            raise ValidationError(f"word start {self.start} > end {self.end}")

    @property
    def midpoint(self) -> float:
        return (self.start + self.end) / 2.0


@dataclass
class Segment:
    """A time-bounded word sequence with an optional embedding and label.

    ``label`` is the one mutable field: corrections relabel a segment but
    never change its identity, times or words.
    """

    id: str
    t_start: float
    t_end: float
    words: list[Word]
    embedding: Embedding | None = None
    label: SpeakerId | None = None
    parent_id: str | None = None

    @property
    def text(self) -> str:
        return " ".join(w.text for w in self.words)

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    def validate(self) -> None:
        """Check time ordering and word containment invariants."""
        if self.t_start > self.t_end:
            raise ValidationError(
                f"segment start {self.t_start} > end {self.t_end}", location=self.id
            )
        prev = None
        for w in self.words:
            if prev is not None and w.start < prev:
                raise ValidationError("words not sorted by start time", location=self.id)
            prev = w.start
            if (
                w.start < self.t_start - WORD_TIME_TOLERANCE_S
                or w.end > self.t_end + WORD_TIME_TOLERANCE_S
            ):
                raise ValidationError(
                    f"word [{w.start}, {w.end}] outside segment bounds", location=self.id
                )


@dataclass(frozen=True)
class Revision:
    segment_id: str
    old_speaker: SpeakerId
    new_speaker: SpeakerId
    source: str  # "user" | "simulated-user"
    applied_at: int

    def __post_init__(self):
        if self.old_speaker == self.new_speaker:
            raise ValidationError("revision must change the speaker")


@dataclass
class Transcript:
    """Causal, append-only log of labeled segments plus their corrections.

    Entry order never changes after append; corrections mutate only a
    segment's ``label`` and append a Revision.
    """

    entries: list[tuple[Segment, int]] = field(default_factory=list)
    revisions: list[Revision] = field(default_factory=list)

    def append(self, segment: Segment, assigned_at: int) -> None:
        self.entries.append((segment, assigned_at))

    def segments(self) -> list[Segment]:
        return [seg for seg, _ in self.entries]

    def find(self, segment_id: str) -> Segment | None:
        for seg, _ in self.entries:
            if seg.id == segment_id:
                return seg
        return None

    def last(self, n: int) -> list[Segment]:
        return [seg for seg, _ in self.entries[-n:]]

    def lines(self, segments: list[Segment] | None = None) -> list[str]:
        """Speaker-attributed display lines, ``<speaker>: <words>``."""
        segs = self.segments() if segments is None else segments
        return [f"{seg.label}: {seg.text}" for seg in segs]

    def apply_revision(self, revision: Revision) -> None:
        seg = self.find(revision.segment_id)
        if seg is None:
            raise ValidationError(
                "revision references unknown segment", location=revision.segment_id
            )
        seg.label = revision.new_speaker
        self.revisions.append(revision)


@dataclass(frozen=True)
class ReferenceAnnotation:
    """Ground-truth speaker intervals: (onset, duration, speaker)."""

    intervals: tuple[tuple[float, float, SpeakerId], ...]

    def __post_init__(self):
        for onset, dur, spk in self.intervals:
            if dur <= 0:
                raise ValidationError(f"non-positive duration for {spk} at {onset}")

    def speakers(self) -> list[SpeakerId]:
        return sorted({spk for _, _, spk in self.intervals})

    def by_speaker(self) -> dict[SpeakerId, list[tuple[float, float]]]:
        """Per-speaker (start, end) intervals, merged and sorted."""
        out: dict[SpeakerId, list[tuple[float, float]]] = {}
        for onset, dur, spk in sorted(self.intervals):
            out.setdefault(spk, []).append((onset, onset + dur))
        return {spk: merge_intervals(ivs) for spk, ivs in out.items()}

    def overlap(self, speaker: SpeakerId, start: float, end: float) -> float:
        """Total time ``speaker`` is active inside [start, end]."""
        total = 0.0
        for a, b in self.by_speaker().get(speaker, []):
            total += max(0.0, min(b, end) - max(a, start))
        return total


def merge_intervals(
    intervals: list[tuple[float, float]], gap: float = 0.0
) -> list[tuple[float, float]]:
    """Sort intervals and merge any that overlap or sit within ``gap``."""
    merged: list[tuple[float, float]] = []
    for start, end in sorted(intervals):
        if merged and start <= merged[-1][1] + gap:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return merged


@dataclass(frozen=True)
class SessionConfig:
    """Tunable parameters for one correction session.

    ``max_online_enrollments=None`` resolves to 1 when splitting is
    enabled and 2 otherwise; ``correction_context_turns=None`` resolves
    to the summary interval.
    """

    swm_window_s: float = 1.0
    swm_stride_s: float = 0.2
    dominance: float = 0.7
    summary_interval: int = 15
    correction_limit: int = 30
    max_online_enrollments: int | None = None
    display_mode: str = "summary"  # "summary" | "conversation"
    correction_context_turns: int | None = None
    collar_s: float = 0.0

    def __post_init__(self):
        if self.swm_window_s <= 0:
            raise ValidationError("window must be positive")
        if not 0 < self.swm_stride_s <= self.swm_window_s:
            raise ValidationError("stride must be in (0, window]")
        if not 0 < self.dominance <= 1:
            raise ValidationError("dominance threshold must be in (0, 1]")
        if self.summary_interval < 1:
            raise ValidationError("summary interval must be >= 1")
        if self.correction_limit < 0:
            raise ValidationError("correction limit must be >= 0")
        if self.max_online_enrollments is not None and self.max_online_enrollments < 0:
            raise ValidationError("online enrollment cap must be >= 0")
        if self.display_mode not in ("summary", "conversation"):
            raise ValidationError(f"unknown display mode {self.display_mode!r}")

    def resolved_oe_cap(self, swm_enabled: bool) -> int:
        if self.max_online_enrollments is not None:
            return self.max_online_enrollments
        return 1 if swm_enabled else 2

    def resolved_context_turns(self) -> int:
        if self.correction_context_turns is not None:
            return self.correction_context_turns
        return self.summary_interval


def segment_to_dict(seg: Segment) -> dict:
    """JSON-ready form of a segment (embedding as a plain list)."""
    rec: dict = {
        "id": seg.id,
        "start": seg.t_start,
        "end": seg.t_end,
        "words": [{"w": w.text, "s": w.start, "e": w.end} for w in seg.words],
    }
    if seg.embedding is not None:
        rec["embedding"] = [float(x) for x in seg.embedding]
    if seg.label is not None:
        rec["label"] = seg.label
    if seg.parent_id is not None:
        rec["parent_id"] = seg.parent_id
    return rec


def copy_segment(seg: Segment) -> Segment:
    return replace(seg, words=list(seg.words))
