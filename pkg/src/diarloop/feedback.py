"""The correction loop: displays, wake-word gating, parsing, applying.

Every summary tick renders the last ``I`` transcript lines (verbatim or
summarized through the gateway), a user message gated on the wake word
is parsed into a structured correction, the target line is located by
text match, and the fix lands as a revision plus an optional online
enrollment.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass

from .enrollment import EnrollmentPool
from .errors import (
    GatewayError,
    ParseFailureError,
    StaleCorrectionError,
    TargetNotFoundError,
    ValidationError,
)
from .gateway import TextGateway, fill_prompt
from .metrics import Timeline
from .model import Revision, Segment, SessionConfig, SpeakerId, Transcript

WAKE_WORD = "hey cobi"

# Minimum token-overlap F1 for fuzzy sentence matching.
MATCH_F1_THRESHOLD = 0.6

DIRECTIVE_FIELDS = (
    "original_speaker_id",
    "original_sentence",
    "corrected_speaker_id",
    "corrected_sentence",
)


@dataclass(frozen=True)
class DisplayWindow:
    mode: str
    segment_ids: tuple[str, ...]
    text: str
    word_count: int
    degraded: bool = False


@dataclass(frozen=True)
class FeedbackMessage:
    raw_text: str
    normalized: str


@dataclass(frozen=True)
class CorrectionDirective:
    original_speaker_id: SpeakerId
    original_sentence: str
    corrected_speaker_id: SpeakerId
    corrected_sentence: str

    def __post_init__(self):
        if self.original_speaker_id == self.corrected_speaker_id:
            raise ValidationError("correction must change the speaker")


@dataclass
class LoopState:
    correction_limit: int
    corrections_used: int = 0
    segments_since_summary: int = 0
    limit_reached: bool = False

    def note_applied(self) -> None:
        self.corrections_used += 1
        if self.corrections_used >= self.correction_limit:
            self.limit_reached = True

    @property
    def budget_left(self) -> bool:
        return self.corrections_used < self.correction_limit


def gate_feedback(raw_text: str) -> FeedbackMessage:
    """Admit a message only if it starts with the wake word.

    The normalized form drops the wake word and any separator right
    after it.
    """
    trimmed = raw_text.strip()
    if not trimmed.lower().startswith(WAKE_WORD):
        raise ValidationError("message does not start with the wake word")
    rest = trimmed[len(WAKE_WORD) :]
    rest = re.sub(r"^[\s:,.!-]+", "", rest)
    return FeedbackMessage(raw_text=raw_text, normalized=rest)


def render_display(
    transcript: Transcript, cfg: SessionConfig, gateway: TextGateway
) -> DisplayWindow:
    """Build the tick's display over the most recent ``I`` segments."""
    window = transcript.last(cfg.summary_interval)
    if not window:
        raise ValidationError("nothing to display")
    lines = transcript.lines(window)
    ids = tuple(seg.id for seg in window)
    conversation = "\n".join(lines)
    if cfg.display_mode == "conversation":
        return DisplayWindow(
            mode="conversation",
            segment_ids=ids,
            text=conversation,
            word_count=len(conversation.split()),
        )
    try:
        summary = gateway.complete(
            "summarization", fill_prompt("summarization", [conversation])
        )
        return DisplayWindow(
            mode="summary",
            segment_ids=ids,
            text=summary,
            word_count=len(summary.split()),
        )
    except GatewayError:
        return DisplayWindow(
            mode="conversation",
            segment_ids=ids,
            text=conversation,
            word_count=len(conversation.split()),
            degraded=True,
        )


def _extract_json_object(text: str) -> dict | None:
    """First balanced ``{...}`` in the text, parsed; None if absent/bad."""
    start = text.find("{")
    while start >= 0:
        depth = 0
        in_string = False
        escape = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_string:
                if escape:
                    escape = False
                elif ch == "\\":
                    escape = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    try:
                        obj = json.loads(text[start : i + 1])
                    except json.JSONDecodeError:
                        break
                    return obj if isinstance(obj, dict) else None
        start = text.find("{", start + 1)
    return None


def _validate_directive(obj: dict, speakers: list[SpeakerId]) -> CorrectionDirective:
    for key in DIRECTIVE_FIELDS:
        if key not in obj or not isinstance(obj[key], str) or not obj[key].strip():
            raise ValidationError(f"directive missing field {key!r}")
    if obj["original_speaker_id"] not in speakers:
        raise ValidationError(f"unknown speaker {obj['original_speaker_id']!r}")
    if obj["corrected_speaker_id"] not in speakers:
        raise ValidationError(f"unknown speaker {obj['corrected_speaker_id']!r}")
    if obj["corrected_sentence"].strip() != obj["original_sentence"].strip():
        raise ValidationError("corrected sentence must repeat the original sentence")
    return CorrectionDirective(
        original_speaker_id=obj["original_speaker_id"],
        original_sentence=obj["original_sentence"].strip(),
        corrected_speaker_id=obj["corrected_speaker_id"],
        corrected_sentence=obj["corrected_sentence"].strip(),
    )


def parse_feedback(
    msg: FeedbackMessage,
    context_lines: list[str],
    speakers: list[SpeakerId],
    gateway: TextGateway,
) -> CorrectionDirective:
    """Turn a gated user message into a structured correction.

    The gateway sees the recent predicted conversation, the message and
    the enrolled speakers; its reply must contain one JSON object with
    the four directive fields. One retry on malformed output, then the
    attempt is abandoned (it does not consume the correction budget).
    """
    if not context_lines:
        raise ValidationError("correction context is empty")
    filled = fill_prompt(
        "correction",
        ["\n".join(context_lines), msg.raw_text, ", ".join(speakers)],
    )
    last_error: Exception | None = None
    for _ in range(2):
        try:
            reply = gateway.complete("correction", filled)
        except GatewayError as exc:
            last_error = exc
            continue
        obj = _extract_json_object(reply)
        if obj is None:
            last_error = ParseFailureError("no JSON object in gateway reply")
            continue
        try:
            return _validate_directive(obj, speakers)
        except ValidationError as exc:
            last_error = exc
    raise ParseFailureError(f"could not parse correction: {last_error}")


def normalize_text(s: str) -> str:
    """Lowercase, strip punctuation, collapse whitespace."""
    return " ".join(re.sub(r"[^\w\s]", " ", s.lower()).split())


def token_f1(a: str, b: str) -> float:
    ta = normalize_text(a).split()
    tb = normalize_text(b).split()
    if not ta or not tb:
        return 0.0
    common = Counter(ta) & Counter(tb)
    return 2.0 * sum(common.values()) / (len(ta) + len(tb))


def locate_target(
    directive: CorrectionDirective, transcript: Transcript, k: int
) -> str:
    """Find the corrected segment among the last ``k`` transcript entries.

    Only segments currently labeled with the directive's wrong speaker
    are candidates; an exact normalized-text match wins, otherwise the
    best token-F1 above the threshold, most recent on ties.
    """
    wanted = normalize_text(directive.original_sentence)
    candidates = [
        seg
        for seg in transcript.last(k)
        if seg.label == directive.original_speaker_id
    ]
    for seg in reversed(candidates):
        if normalize_text(seg.text) == wanted:
            return seg.id
    best_id: str | None = None
    best_f1 = 0.0
    for seg in candidates:  # later candidates win ties
        f1 = token_f1(seg.text, directive.original_sentence)
        if f1 >= best_f1:
            best_f1 = f1
            best_id = seg.id
    if best_id is None or best_f1 < MATCH_F1_THRESHOLD:
        raise TargetNotFoundError(
            f"no line of {directive.original_speaker_id} matches the sentence "
            f"(best F1 {best_f1:.2f})"
        )
    return best_id


def apply_correction(
    segment_id: str,
    directive: CorrectionDirective,
    transcript: Transcript,
    pool: EnrollmentPool,
    applied_at: int,
    source: str = "user",
    relabel: bool = True,
    enroll: bool = True,
    enrolled_keys: set[tuple[str, SpeakerId]] | None = None,
) -> tuple[EnrollmentPool, Revision | None, bool]:
    """Re-label the target segment and enroll its embedding online.

    Returns the updated pool, the revision (None when relabeling is
    disabled), and whether an enrollment happened. A segment whose label
    no longer matches the directive is stale and left untouched. The
    same segment enrolls at most once per corrected speaker, so
    oscillating feedback cannot stack duplicates.
    """
    seg = transcript.find(segment_id)
    if seg is None:
        raise TargetNotFoundError(f"segment {segment_id!r} not in transcript")
    if seg.label != directive.original_speaker_id:
        raise StaleCorrectionError(
            f"segment {segment_id!r} is labeled {seg.label!r}, "
            f"not {directive.original_speaker_id!r}"
        )
    revision: Revision | None = None
    if relabel:
        revision = Revision(
            segment_id=segment_id,
            old_speaker=directive.original_speaker_id,
            new_speaker=directive.corrected_speaker_id,
            source=source,
            applied_at=applied_at,
        )
        transcript.apply_revision(revision)
    enrolled = False
    if enroll and seg.embedding is not None and pool.online_cap > 0:
        key = (segment_id, directive.corrected_speaker_id)
        if enrolled_keys is None or key not in enrolled_keys:
            pool = pool.enroll_online(directive.corrected_speaker_id, seg.embedding)
            enrolled = True
            if enrolled_keys is not None:
                enrolled_keys.add(key)
    return pool, revision, enrolled


def oracle_feedback(
    window: list[Segment], reference: Timeline, speakers: list[SpeakerId]
) -> tuple[FeedbackMessage, CorrectionDirective] | None:
    """Deterministic stand-in for a human reviewer.

    Targets the window segment with the largest span of reference
    speech attributed to the wrong speaker, quoting its first five
    words. Returns None when the window shows nothing to fix.
    """
    best: tuple[float, int, Segment, SpeakerId] | None = None
    for idx, seg in enumerate(window):
        overlaps = {
            spk: reference.overlap(spk, seg.t_start, seg.t_end) for spk in speakers
        }
        top = max(overlaps.values(), default=0.0)
        if top <= 0.0:
            continue
        true_spk = min(s for s, v in overlaps.items() if v == top)
        if true_spk == seg.label:
            continue
        # ties go to the most recent segment
        if best is None or top >= best[0]:
            best = (top, idx, seg, true_spk)
    if best is None:
        return None
    _, _, seg, true_spk = best
    quote = " ".join(seg.text.split()[:5])
    message = gate_feedback(
        f"Hey COBI: Predicted {seg.label}, saying {quote}, was actually {true_spk}."
    )
    directive = CorrectionDirective(
        original_speaker_id=seg.label,
        original_sentence=seg.text,
        corrected_speaker_id=true_spk,
        corrected_sentence=seg.text,
    )
    return message, directive


def gateway_feedback(
    truth_lines: list[str],
    display: DisplayWindow,
    speakers: list[SpeakerId],
    gateway: TextGateway,
) -> FeedbackMessage | None:
    """Ask the gateway to play the user; None when it declines."""
    filled = fill_prompt(
        "feedback_simulation",
        ["\n".join(truth_lines), display.text, ", ".join(speakers)],
    )
    try:
        reply = gateway.complete("feedback_simulation", filled)
    except GatewayError:
        return None
    try:
        return gate_feedback(reply)
    except ValidationError:
        return None
