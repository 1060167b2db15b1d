"""Single-writer correction engine shared by the simulator and the
live session service.

Segments stream in, get assigned, optionally split, and append to the
transcript; every ``I`` appended entries a display tick fires; gated
feedback messages turn into revisions and online enrollments. Every
action is audited with a monotone logical index so a run can be
replayed and checked for causality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

from .enrollment import EnrollmentPool, assign_speaker
from .errors import (
    DiarloopError,
    ParseFailureError,
    StaleCorrectionError,
    TargetNotFoundError,
    ValidationError,
)
from .feedback import (
    DisplayWindow,
    LoopState,
    apply_correction,
    gate_feedback,
    locate_target,
    parse_feedback,
    render_display,
)
from .gateway import TextGateway
from .model import Embedding, Segment, SessionConfig, SpeakerId, segment_to_dict
from .swm import VoteProvider, apply_swm

PROTOCOL_VERSION = 1

PUBLIC_EVENT_KINDS = (
    "segment",
    "summary",
    "revision",
    "enrollment",
    "limit-reached",
    "error",
)


@dataclass(frozen=True)
class Toggles:
    swm: bool = True
    oe: bool = True
    corrections: bool = True

    @property
    def loop_active(self) -> bool:
        return self.corrections or self.oe


def _event(index: int, kind: str, payload: dict) -> dict:
    return {"v": PROTOCOL_VERSION, "i": index, "kind": kind, "payload": payload}


@dataclass
class Engine:
    cfg: SessionConfig
    pool: EnrollmentPool
    gateway: TextGateway
    toggles: Toggles = field(default_factory=Toggles)
    vote_provider: VoteProvider | None = None
    embedding_lookup: Callable[[float, float], Embedding] | None = None
    feedback_source: str = "user"

    def __post_init__(self):
        from .model import Transcript

        self.transcript = Transcript()
        self.loop = LoopState(correction_limit=self.cfg.correction_limit)
        self.audit: list[dict] = []
        self.enrolled_keys: set[tuple[str, SpeakerId]] = set()
        self._next_index = 0
        self._last_t_start: float | None = None
        self._limit_event_sent = False

    @property
    def speakers(self) -> list[SpeakerId]:
        return self.pool.speakers()

    def _record(self, kind: str, payload: dict) -> dict:
        ev = _event(self._next_index, kind, payload)
        self._next_index += 1
        self.audit.append(ev)
        return ev

    def _public(self, events: list[dict]) -> list[dict]:
        return [ev for ev in events if ev["kind"] in PUBLIC_EVENT_KINDS]

    def correction_context(self) -> list[str]:
        """The predicted lines a correction is parsed and located against."""
        k = self.cfg.resolved_context_turns()
        return self.transcript.lines(self.transcript.last(k))

    # -- segment path ---------------------------------------------------

    def _append(self, segment: Segment, trace) -> dict:
        at = self._next_index
        self.transcript.append(segment, at)
        payload: dict[str, Any] = {"segment": segment_to_dict(segment)}
        if trace is not None:
            payload["trace"] = {
                "chosen": trace.chosen,
                "scores": {k: float(v) for k, v in sorted(trace.scores.items())},
                "pool_revision": trace.pool_revision,
            }
        return self._record("segment", payload)

    def push_segment(self, segment: Segment) -> list[dict]:
        """Assign, optionally split, append; fires a summary tick every
        ``summary_interval`` appended entries. Returns public events."""
        events: list[dict] = []
        try:
            segment.validate()
            if (
                self._last_t_start is not None
                and segment.t_start < self._last_t_start
            ):
                raise ValidationError(
                    f"segment {segment.id!r} arrived out of stream order",
                    location=segment.id,
                )
            if segment.embedding is None and segment.label is None:
                raise ValidationError(
                    "segment needs an embedding or a preset label", location=segment.id
                )
        except ValidationError as exc:
            return [self._record("error", {"stage": "ingest", "message": str(exc)})]

        self._last_t_start = segment.t_start

        trace = None
        if segment.embedding is not None:
            trace = assign_speaker(segment.embedding, self.pool, segment.id)
            segment.label = trace.chosen

        emitted: list[Segment] = [segment]
        if self.toggles.swm and self.vote_provider is not None and segment.words:
            result, votes = apply_swm(segment, self.vote_provider, self.cfg)
            self._record(
                "votes",
                {
                    "segment_id": segment.id,
                    "votes": [{"t": v.at, "speaker": v.speaker} for v in votes],
                    "split": result.split,
                    "reason": result.reason,
                    "split_index": result.split_index,
                },
            )
            if result.split:
                left, right = result.left, result.right
                if self.embedding_lookup is not None:
                    for child in (left, right):
                        child.embedding = self.embedding_lookup(
                            child.t_start, child.t_end
                        )
                        child_trace = assign_speaker(
                            child.embedding, self.pool, child.id
                        )
                        child.label = child_trace.chosen
                emitted = [left, right]

        for seg in emitted:
            events.append(self._append(seg, trace if seg is segment else None))

        self.loop.segments_since_summary += len(emitted)
        if self.loop.segments_since_summary >= self.cfg.summary_interval:
            self.loop.segments_since_summary = 0
            if self.toggles.loop_active:
                window = render_display(self.transcript, self.cfg, self.gateway)
                events.append(self._record("summary", _display_payload(window)))
        return self._public(events)

    # -- feedback path --------------------------------------------------

    def push_feedback(self, raw_text: str) -> list[dict]:
        """Gate, parse, locate and apply one user message.

        Failures surface as error events naming the failed stage and
        leave all state untouched. Post-limit messages are acknowledged
        with no events beyond the one-time limit notice.
        """
        if not self.toggles.loop_active:
            return [
                self._record(
                    "error", {"stage": "disabled", "message": "correction loop is off"}
                )
            ]
        try:
            msg = gate_feedback(raw_text)
        except ValidationError as exc:
            return [self._record("error", {"stage": "gate", "message": str(exc)})]

        if not self.loop.budget_left:
            return self._emit_limit_reached()

        self._record("feedback", {"raw_text": msg.raw_text})
        context = self.correction_context()
        try:
            directive = parse_feedback(msg, context, self.speakers, self.gateway)
        except (ParseFailureError, ValidationError) as exc:
            return [self._record("error", {"stage": "parse", "message": str(exc)})]

        try:
            segment_id = locate_target(
                directive, self.transcript, self.cfg.resolved_context_turns()
            )
        except TargetNotFoundError as exc:
            return [self._record("error", {"stage": "locate", "message": str(exc)})]

        try:
            pool, revision, enrolled = apply_correction(
                segment_id,
                directive,
                self.transcript,
                self.pool,
                applied_at=self._next_index,
                source=self.feedback_source,
                relabel=self.toggles.corrections,
                enroll=self.toggles.oe,
                enrolled_keys=self.enrolled_keys,
            )
        except (StaleCorrectionError, TargetNotFoundError, DiarloopError) as exc:
            return [self._record("error", {"stage": "apply", "message": str(exc)})]

        events: list[dict] = []
        self._record(
            "directive",
            {
                "segment_id": segment_id,
                "original_speaker_id": directive.original_speaker_id,
                "original_sentence": directive.original_sentence,
                "corrected_speaker_id": directive.corrected_speaker_id,
                "corrected_sentence": directive.corrected_sentence,
            },
        )
        if revision is not None or enrolled:
            self.loop.note_applied()
        if revision is not None:
            events.append(
                self._record(
                    "revision",
                    {
                        "segment_id": revision.segment_id,
                        "old_speaker": revision.old_speaker,
                        "new_speaker": revision.new_speaker,
                        "source": revision.source,
                        "applied_at": revision.applied_at,
                        "corrections_used": self.loop.corrections_used,
                    },
                )
            )
        if enrolled:
            self.pool = pool
            events.append(
                self._record(
                    "enrollment",
                    {
                        "speaker": directive.corrected_speaker_id,
                        "segment_id": segment_id,
                        "pool_revision": self.pool.revision,
                        "online_counts": self.pool.online_counts(),
                        "corrections_used": self.loop.corrections_used,
                    },
                )
            )
        if (revision is not None or enrolled) and self.loop.limit_reached:
            events.extend(self._emit_limit_reached())
        return self._public(events)

    def _emit_limit_reached(self) -> list[dict]:
        if self._limit_event_sent:
            return []
        self._limit_event_sent = True
        return [
            self._record(
                "limit-reached", {"corrections_used": self.loop.corrections_used}
            )
        ]

    # -- snapshots ------------------------------------------------------

    def snapshot(self) -> dict:
        """Read-only view of the full engine state for late joiners."""
        return {
            "v": PROTOCOL_VERSION,
            "rows": [
                {
                    "segment_id": seg.id,
                    "speaker": seg.label,
                    "text": seg.text,
                    "t_start": seg.t_start,
                    "t_end": seg.t_end,
                    "parent_id": seg.parent_id,
                    "revised": any(
                        r.segment_id == seg.id for r in self.transcript.revisions
                    ),
                }
                for seg in self.transcript.segments()
            ],
            "corrections_used": self.loop.corrections_used,
            "correction_limit": self.cfg.correction_limit,
            "limit_reached": self.loop.limit_reached,
            "enrollments": self.pool.online_counts(),
            "speakers": self.speakers,
            "last_logical_index": self._next_index - 1,
        }


def _display_payload(window: DisplayWindow) -> dict:
    return {
        "mode": window.mode,
        "segment_ids": list(window.segment_ids),
        "text": window.text,
        "word_count": window.word_count,
        "degraded": window.degraded,
    }


def replay_audit(audit: list[dict]) -> list[tuple[str, SpeakerId]]:
    """Reconstruct (segment_id, final label) pairs from an audit log.

    Fold of the append and revision events only; used to verify that a
    recorded run fully determines its final transcript.
    """
    labels: dict[str, SpeakerId] = {}
    order: list[str] = []
    last_index = -1
    for ev in audit:
        if ev["i"] <= last_index:
            raise ValidationError("audit log indices are not strictly increasing")
        last_index = ev["i"]
        if ev["kind"] == "segment":
            seg = ev["payload"]["segment"]
            labels[seg["id"]] = seg.get("label")
            order.append(seg["id"])
        elif ev["kind"] == "revision":
            sid = ev["payload"]["segment_id"]
            if sid not in labels:
                raise ValidationError("revision precedes its segment in the audit log")
            labels[sid] = ev["payload"]["new_speaker"]
    return [(sid, labels[sid]) for sid in order]
