"""Meeting bundle file set: segments, reference, seeds, manifest.

One meeting ships as a directory of line-oriented UTF-8 files plus a
manifest carrying the speaker list, the embedding dimension, and
per-file checksums. Segment records, seeds and ground-truth lines are
one JSON object per line; references use RTTM.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ValidationError
from .model import (
    Embedding,
    ReferenceAnnotation,
    Segment,
    SpeakerId,
    Word,
    merge_intervals,
    segment_to_dict,
)

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
SEGMENTS_NAME = "segments.jsonl"
REFERENCE_NAME = "reference.rttm"
SEEDS_NAME = "seeds.jsonl"
TRUTH_NAME = "truth.jsonl"
VOTES_NAME = "votes.jsonl"

SegmentVotes = dict[str, list[tuple[float, SpeakerId]]]


@dataclass
class MeetingBundle:
    meeting_id: str
    speakers: list[SpeakerId]
    dim: int
    segments: list[Segment]
    reference: ReferenceAnnotation
    seeds: dict[SpeakerId, list[Embedding]]
    votes: SegmentVotes = field(default_factory=dict)
    truth_lines: list[str] = field(default_factory=list)

    def validate(self) -> None:
        known = set(self.speakers)
        for spk in self.reference.speakers():
            if spk not in known:
                raise ValidationError(f"reference speaker {spk!r} not in manifest")
        for spk in self.seeds:
            if spk not in known:
                raise ValidationError(f"seed speaker {spk!r} not in manifest")
        prev = None
        for seg in self.segments:
            seg.validate()
            if seg.embedding is not None and len(seg.embedding) != self.dim:
                raise ValidationError(
                    f"embedding dimension {len(seg.embedding)} != {self.dim}",
                    location=seg.id,
                )
            if prev is not None and seg.t_start < prev:
                raise ValidationError("segments not in time order", location=seg.id)
            prev = seg.t_start


def parse_rttm(lines: Iterable[str]) -> ReferenceAnnotation:
    """Collect SPEAKER records into a reference annotation.

    Same-speaker overlapping intervals are merged; other record types
    are ignored. Malformed SPEAKER lines fail with their line number.
    """
    raw: dict[SpeakerId, list[tuple[float, float]]] = {}
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith(";;"):
            continue
        fields = stripped.split()
        if fields[0] != "SPEAKER":
            continue
        if len(fields) < 9:
            raise ValidationError(
                f"RTTM SPEAKER line has {len(fields)} fields, expected >= 9",
                location=f"line {lineno}",
            )
        try:
            onset = float(fields[3])
            duration = float(fields[4])
        except ValueError as exc:
            raise ValidationError(
                f"bad onset/duration: {exc}", location=f"line {lineno}"
            ) from exc
        if duration <= 0:
            raise ValidationError(
                f"non-positive duration {duration}", location=f"line {lineno}"
            )
        raw.setdefault(fields[7], []).append((onset, onset + duration))
    intervals: list[tuple[float, float, SpeakerId]] = []
    for spk, ivs in raw.items():
        for start, end in merge_intervals(ivs):
            intervals.append((start, end - start, spk))
    intervals.sort()
    return ReferenceAnnotation(intervals=tuple(intervals))


def serialize_rttm(ref: ReferenceAnnotation, file_id: str = "meeting") -> str:
    lines = [
        f"SPEAKER {file_id} 1 {onset!r} {dur!r} <NA> <NA> {spk} <NA> <NA>"
        for onset, dur, spk in sorted(ref.intervals)
    ]
    return "\n".join(lines) + "\n"


def _parse_word(obj: dict, where: str) -> Word:
    try:
        return Word(text=str(obj["w"]), start=float(obj["s"]), end=float(obj["e"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"bad word record: {exc}", location=where) from exc


def parse_segments(
    lines: Iterable[str], dim: int | None = None
) -> tuple[list[Segment], SegmentVotes]:
    """One JSON segment record per line; returns segments and any
    inline window votes. Out-of-order records are sorted by start time
    with a warning; structural problems raise located errors."""
    segments: list[Segment] = []
    votes: SegmentVotes = {}
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        where = f"line {lineno}"
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"bad JSON: {exc}", location=where) from exc
        try:
            seg = Segment(
                id=str(rec["id"]),
                t_start=float(rec["start"]),
                t_end=float(rec["end"]),
                words=[_parse_word(w, where) for w in rec.get("words", [])],
                label=rec.get("label"),
                parent_id=rec.get("parent_id"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"bad segment record: {exc}", location=where) from exc
        if "embedding" in rec:
            emb = np.asarray(rec["embedding"], dtype=np.float64)
            if dim is not None and emb.shape != (dim,):
                raise ValidationError(
                    f"embedding dimension {emb.shape} != ({dim},)", location=where
                )
            seg.embedding = emb
        seg.validate()
        if "votes" in rec:
            votes[seg.id] = [(float(v["t"]), str(v["speaker"])) for v in rec["votes"]]
        segments.append(seg)
    if any(
        segments[i].t_start > segments[i + 1].t_start for i in range(len(segments) - 1)
    ):
        logger.warning("segment records out of time order; sorting by start time")
        segments.sort(key=lambda s: s.t_start)
    return segments, votes


def serialize_segments(segments: list[Segment], votes: SegmentVotes | None = None) -> str:
    out = []
    for seg in segments:
        rec = segment_to_dict(seg)
        if votes and seg.id in votes:
            rec["votes"] = [{"t": t, "speaker": s} for t, s in votes[seg.id]]
        out.append(json.dumps(rec, sort_keys=True))
    return "\n".join(out) + "\n"


def parse_seeds(
    lines: Iterable[str], dim: int | None = None
) -> dict[SpeakerId, list[Embedding]]:
    seeds: dict[SpeakerId, list[Embedding]] = {}
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            spk = str(rec["speaker"])
            emb = np.asarray(rec["embedding"], dtype=np.float64)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValidationError(
                f"bad seed record: {exc}", location=f"line {lineno}"
            ) from exc
        if dim is not None and emb.shape != (dim,):
            raise ValidationError(
                f"seed dimension {emb.shape} != ({dim},)", location=f"line {lineno}"
            )
        seeds.setdefault(spk, []).append(emb)
    return seeds


def serialize_seeds(seeds: dict[SpeakerId, list[Embedding]]) -> str:
    out = []
    for spk in sorted(seeds):
        for emb in seeds[spk]:
            out.append(
                json.dumps(
                    {"speaker": spk, "embedding": [float(x) for x in emb]},
                    sort_keys=True,
                )
            )
    return "\n".join(out) + "\n"


def derive_truth_lines(segments: list[Segment], ref: ReferenceAnnotation) -> list[str]:
    """Ground-truth display lines when no transcript file ships: each
    reference interval gets the hypothesis words whose midpoints fall
    inside it."""
    words = [w for seg in segments for w in seg.words]
    words.sort(key=lambda w: w.start)
    lines = []
    for onset, dur, spk in sorted(ref.intervals):
        inside = [w.text for w in words if onset <= w.midpoint < onset + dur]
        if inside:
            lines.append(f"{spk}: {' '.join(inside)}")
    return lines


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def save_bundle(bundle: MeetingBundle, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bundle.validate()
    (out / SEGMENTS_NAME).write_text(
        serialize_segments(bundle.segments, bundle.votes), "utf-8"
    )
    (out / REFERENCE_NAME).write_text(
        serialize_rttm(bundle.reference, bundle.meeting_id), "utf-8"
    )
    (out / SEEDS_NAME).write_text(serialize_seeds(bundle.seeds), "utf-8")
    files = {
        "segments": SEGMENTS_NAME,
        "reference": REFERENCE_NAME,
        "seeds": SEEDS_NAME,
    }
    if bundle.truth_lines:
        truth = "\n".join(
            json.dumps({"line": line}, sort_keys=True) for line in bundle.truth_lines
        )
        (out / TRUTH_NAME).write_text(truth + "\n", "utf-8")
        files["truth"] = TRUTH_NAME
    manifest = {
        "meeting_id": bundle.meeting_id,
        "speakers": bundle.speakers,
        "dim": bundle.dim,
        "files": files,
        "sha256": {name: _sha256(out / name) for name in files.values()},
    }
    (out / MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", "utf-8"
    )
    return out


def load_bundle(bundle_dir: str | Path) -> MeetingBundle:
    root = Path(bundle_dir)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.exists():
        raise ValidationError("bundle manifest missing", location=str(manifest_path))
    manifest = json.loads(manifest_path.read_text("utf-8"))
    for key in ("meeting_id", "speakers", "dim", "files"):
        if key not in manifest:
            raise ValidationError(f"manifest missing {key!r}", location=str(manifest_path))
    files = manifest["files"]
    for name, filename in files.items():
        if not (root / filename).exists():
            raise ValidationError(f"bundle file missing: {filename}", location=name)
        expected = manifest.get("sha256", {}).get(filename)
        if expected and _sha256(root / filename) != expected:
            raise ValidationError(f"checksum mismatch for {filename}", location=name)

    dim = int(manifest["dim"])
    seg_lines = (root / files["segments"]).read_text("utf-8").splitlines()
    segments, votes = parse_segments(seg_lines, dim=dim)
    reference = parse_rttm((root / files["reference"]).read_text("utf-8").splitlines())
    seeds = parse_seeds((root / files["seeds"]).read_text("utf-8").splitlines(), dim=dim)
    if "votes" in files:
        extra = _parse_votes_file((root / files["votes"]).read_text("utf-8").splitlines())
        for sid, vs in extra.items():
            votes.setdefault(sid, []).extend(vs)
    if "truth" in files:
        truth_lines = [
            json.loads(line)["line"]
            for line in (root / files["truth"]).read_text("utf-8").splitlines()
            if line.strip()
        ]
    else:
        truth_lines = derive_truth_lines(segments, reference)
    bundle = MeetingBundle(
        meeting_id=str(manifest["meeting_id"]),
        speakers=list(manifest["speakers"]),
        dim=dim,
        segments=segments,
        reference=reference,
        seeds=seeds,
        votes=votes,
        truth_lines=truth_lines,
    )
    bundle.validate()
    return bundle


def _parse_votes_file(lines: Iterable[str]) -> SegmentVotes:
    votes: SegmentVotes = {}
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            votes.setdefault(str(rec["segment_id"]), []).append(
                (float(rec["t"]), str(rec["speaker"]))
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValidationError(
                f"bad vote record: {exc}", location=f"line {lineno}"
            ) from exc
    return votes
