"""Meeting replay and parameter sweeps.

A run feeds a bundle's segments through the engine in stream order,
injects simulated user feedback at every summary tick, and scores the
final transcript against the reference. Sweeps repeat runs over a
parameter grid with shared inputs so grid points stay paired.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .bundles import MeetingBundle
from .engine import Engine, Toggles
from .enrollment import EnrollmentPool
from .errors import ValidationError
from .feedback import gateway_feedback, oracle_feedback
from .gateway import (
    RuleBasedGateway,
    ScriptedGateway,
    TextGateway,
    fill_prompt,
)
from .metrics import (
    MetricsReport,
    SignificanceResult,
    Timeline,
    compute_der,
    one_sample_t,
    relative_improvement,
)
from .model import SessionConfig, Transcript, copy_segment
from .swm import PrecomputedVoteProvider, ReferenceVoteProvider


@dataclass(frozen=True)
class RunSpec:
    cfg: SessionConfig = field(default_factory=SessionConfig)
    toggles: Toggles = field(default_factory=Toggles)
    oracle_user: bool = True
    seed: int = 0
    vote_noise: float = 0.0  # only used when a bundle ships no votes
    mapping: str = "identity"


@dataclass
class RunResult:
    meeting_id: str
    transcript: Transcript
    report: MetricsReport
    audit: list[dict]
    stats: dict

    def to_json(self) -> str:
        """Canonical serialization; byte-stable for identical runs."""
        payload = {
            "meeting_id": self.meeting_id,
            "labels": [
                (seg.id, seg.label) for seg in self.transcript.segments()
            ],
            "revisions": [
                {
                    "segment_id": r.segment_id,
                    "old_speaker": r.old_speaker,
                    "new_speaker": r.new_speaker,
                    "source": r.source,
                    "applied_at": r.applied_at,
                }
                for r in self.transcript.revisions
            ],
            "report": self.report.to_dict(),
            "stats": self.stats,
            "audit": self.audit,
        }
        return json.dumps(payload, sort_keys=True)


class OracleGateway:
    """Routes correction requests to a scripted store that the oracle
    user fills in, everything else to the rule-based offline model."""

    def __init__(self, responses: dict[str, str] | None = None):
        self.scripted = ScriptedGateway(responses)
        self.fallback = RuleBasedGateway()

    def complete(self, prompt_name: str, filled_template: str) -> str:
        if prompt_name == "correction":
            return self.scripted.complete(prompt_name, filled_template)
        return self.fallback.complete(prompt_name, filled_template)


def build_engine(
    bundle: MeetingBundle, spec: RunSpec, gateway: TextGateway
) -> Engine:
    cap = spec.cfg.resolved_oe_cap(spec.toggles.swm) if spec.toggles.oe else 0
    pool = EnrollmentPool.from_seeds(
        {spk: list(vecs) for spk, vecs in bundle.seeds.items()}, online_cap=cap
    )
    if bundle.votes:
        provider = PrecomputedVoteProvider(bundle.votes)
    else:
        provider = ReferenceVoteProvider(
            bundle.reference, bundle.speakers, noise_rate=spec.vote_noise, seed=spec.seed
        )
    return Engine(
        cfg=spec.cfg,
        pool=pool,
        gateway=gateway,
        toggles=spec.toggles,
        vote_provider=provider,
        feedback_source="simulated-user",
    )


def run_meeting(
    bundle: MeetingBundle, spec: RunSpec, gateway: TextGateway | None = None
) -> RunResult:
    """Replay one meeting under the given settings.

    With the oracle user, each summary tick may produce one correction
    message; its structured resolution is scripted into the gateway so
    the parse path runs exactly as it would against a live service.
    """
    if gateway is None:
        gateway = OracleGateway()
    oracle_gw = gateway if isinstance(gateway, OracleGateway) else None
    engine = build_engine(bundle, spec, gateway)
    ref_timeline = Timeline.from_annotation(bundle.reference)
    speakers = engine.speakers

    display_words: list[int] = []
    parse_failures = 0
    for seg in bundle.segments:
        events = engine.push_segment(copy_segment(seg))
        summary = next((ev for ev in events if ev["kind"] == "summary"), None)
        if summary is None:
            continue
        display_words.append(summary["payload"]["word_count"])
        if not engine.toggles.loop_active or engine.loop.limit_reached:
            continue
        feedback_events: list[dict] = []
        if spec.oracle_user:
            window = engine.transcript.last(spec.cfg.summary_interval)
            pick = oracle_feedback(window, ref_timeline, speakers)
            if pick is None:
                continue
            msg, directive = pick
            if oracle_gw is not None:
                filled = fill_prompt(
                    "correction",
                    [
                        "\n".join(engine.correction_context()),
                        msg.raw_text,
                        ", ".join(speakers),
                    ],
                )
                oracle_gw.scripted.script(
                    "correction",
                    filled,
                    json.dumps(
                        {
                            "original_speaker_id": directive.original_speaker_id,
                            "original_sentence": directive.original_sentence,
                            "corrected_speaker_id": directive.corrected_speaker_id,
                            "corrected_sentence": directive.corrected_sentence,
                        }
                    ),
                )
            feedback_events = engine.push_feedback(msg.raw_text)
        else:
            span_lo = min(s.t_start for s in engine.transcript.last(spec.cfg.summary_interval))
            span_hi = max(s.t_end for s in engine.transcript.last(spec.cfg.summary_interval))
            truth = _truth_lines_in_span(bundle, span_lo, span_hi)
            from .feedback import DisplayWindow

            window_payload = summary["payload"]
            display = DisplayWindow(
                mode=window_payload["mode"],
                segment_ids=tuple(window_payload["segment_ids"]),
                text=window_payload["text"],
                word_count=window_payload["word_count"],
                degraded=window_payload["degraded"],
            )
            msg = gateway_feedback(truth, display, speakers, gateway)
            if msg is None:
                continue
            feedback_events = engine.push_feedback(msg.raw_text)
        parse_failures += sum(
            1
            for ev in feedback_events
            if ev["kind"] == "error" and ev["payload"]["stage"] in ("parse", "locate")
        )

    hyp_timeline = Timeline.from_segments(engine.transcript.segments())
    report = compute_der(
        ref_timeline, hyp_timeline, collar_s=spec.cfg.collar_s, mapping=spec.mapping
    )
    span_minutes = (
        max(seg.t_end for seg in bundle.segments) / 60.0 if bundle.segments else 0.0
    )
    stats = {
        "corrections_applied": engine.loop.corrections_used,
        "corrections_per_min": (
            engine.loop.corrections_used / span_minutes if span_minutes > 0 else 0.0
        ),
        "parse_failures": parse_failures,
        "splits": sum(
            1
            for ev in engine.audit
            if ev["kind"] == "votes" and ev["payload"]["split"]
        ),
        "mean_display_words": (
            sum(display_words) / len(display_words) if display_words else 0.0
        ),
        "ticks": len(display_words),
    }
    return RunResult(
        meeting_id=bundle.meeting_id,
        transcript=engine.transcript,
        report=report,
        audit=engine.audit,
        stats=stats,
    )


def _truth_lines_in_span(bundle: MeetingBundle, lo: float, hi: float) -> list[str]:
    intervals = sorted(bundle.reference.intervals)
    if len(intervals) != len(bundle.truth_lines):
        return list(bundle.truth_lines)
    return [
        line
        for (onset, dur, _), line in zip(intervals, bundle.truth_lines)
        if onset < hi and onset + dur > lo
    ]


BASELINE_SPEC = RunSpec(toggles=Toggles(swm=False, oe=False, corrections=False))


def run_baseline(bundle: MeetingBundle, cfg: SessionConfig | None = None) -> RunResult:
    """Raw assignment only: no splitting, no loop. The comparison point
    for every improvement number."""
    spec = BASELINE_SPEC
    if cfg is not None:
        spec = replace(BASELINE_SPEC, cfg=cfg)
    return run_meeting(bundle, spec)


@dataclass
class SweepPoint:
    params: dict
    per_meeting: list[dict]
    aggregate: dict


@dataclass
class SweepResult:
    points: list[SweepPoint]

    def to_json(self) -> str:
        return json.dumps(
            {
                "points": [
                    {
                        "params": p.params,
                        "per_meeting": p.per_meeting,
                        "aggregate": p.aggregate,
                    }
                    for p in self.points
                ]
            },
            sort_keys=True,
            indent=2,
        )


def _spec_from_point(base: RunSpec, point: dict) -> RunSpec:
    """Grid point keys: interval, limit, display_mode, collar, swm,
    corrections, oracle_user, and oe. ``oe`` accepts a boolean toggle
    (cap at the config default) or an enrollment count, 0 meaning off.
    """
    cfg_updates: dict = {}
    if "interval" in point:
        cfg_updates["summary_interval"] = int(point["interval"])
    if "limit" in point:
        cfg_updates["correction_limit"] = int(point["limit"])
    if "display_mode" in point:
        cfg_updates["display_mode"] = str(point["display_mode"])
    if "collar" in point:
        cfg_updates["collar_s"] = float(point["collar"])
    oe_toggle = base.toggles.oe
    if "oe" in point:
        value = point["oe"]
        if isinstance(value, bool):
            oe_toggle = value
            cfg_updates["max_online_enrollments"] = None
        else:
            oe_toggle = int(value) != 0
            cfg_updates["max_online_enrollments"] = int(value)
    cfg = replace(base.cfg, **cfg_updates) if cfg_updates else base.cfg
    toggles = Toggles(
        swm=bool(point.get("swm", base.toggles.swm)),
        oe=oe_toggle,
        corrections=bool(point.get("corrections", base.toggles.corrections)),
    )
    return replace(
        base,
        cfg=cfg,
        toggles=toggles,
        oracle_user=bool(point.get("oracle_user", base.oracle_user)),
    )


def expand_grid(grid: dict) -> list[dict]:
    """Cartesian product of ``{"axes": {name: [values...]}}`` or the
    explicit ``{"points": [...]}`` form."""
    if "points" in grid:
        return [dict(p) for p in grid["points"]]
    axes = grid.get("axes", {})
    names = sorted(axes)
    points: list[dict] = [{}]
    for name in names:
        points = [dict(p, **{name: v}) for p in points for v in axes[name]]
    return points


def sweep(
    bundles: list[MeetingBundle],
    points: list[dict],
    base: RunSpec | None = None,
) -> SweepResult:
    """Run every grid point over every bundle against shared baselines."""
    if not bundles:
        raise ValidationError("sweep needs at least one bundle")
    base = base or RunSpec()
    baseline_spec = replace(
        BASELINE_SPEC, cfg=base.cfg, mapping=base.mapping, seed=base.seed
    )
    baselines = {
        b.meeting_id: run_meeting(b, baseline_spec).report for b in bundles
    }

    out: list[SweepPoint] = []
    for point in points:
        spec = _spec_from_point(base, point)
        rows: list[dict] = []
        im_ders: list[float] = []
        im_serrs: list[float] = []
        for bundle in bundles:
            result = run_meeting(bundle, spec)
            base_report = baselines[bundle.meeting_id]
            im_der, im_serr = relative_improvement(base_report, result.report)
            im_ders.append(im_der)
            im_serrs.append(im_serr)
            rows.append(
                {
                    "meeting_id": bundle.meeting_id,
                    "der": result.report.der,
                    "conf": result.report.conf,
                    "baseline_der": base_report.der,
                    "baseline_conf": base_report.conf,
                    "im_der": im_der,
                    "im_serr": im_serr,
                    "corrections_applied": result.stats["corrections_applied"],
                    "corrections_per_min": result.stats["corrections_per_min"],
                    "mean_display_words": result.stats["mean_display_words"],
                    "splits": result.stats["splits"],
                }
            )
        significance: SignificanceResult | None = None
        if len(im_ders) >= 2 and len(set(im_ders)) > 1:
            significance = one_sample_t(im_ders)
        aggregate = {
            "mean_im_der": sum(im_ders) / len(im_ders),
            "mean_im_serr": sum(im_serrs) / len(im_serrs),
            "mean_corrections": sum(r["corrections_applied"] for r in rows) / len(rows),
            "mean_corrections_per_min": sum(r["corrections_per_min"] for r in rows)
            / len(rows),
            "mean_display_words": sum(r["mean_display_words"] for r in rows) / len(rows),
            "significance": significance.to_dict() if significance else None,
        }
        out.append(SweepPoint(params=dict(point), per_meeting=rows, aggregate=aggregate))
    return SweepResult(points=out)
