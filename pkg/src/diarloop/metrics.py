"""Diarization scoring: DER decomposition, oracle bounds, significance.

DER is computed by exact interval sweep (no frame discretization):
between consecutive boundary events the active speaker sets are
constant, so miss/false-alarm/confusion integrate in closed form.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .errors import DegenerateSampleError, UndefinedMetricError, ValidationError
from .model import ReferenceAnnotation, Segment, SpeakerId, copy_segment, merge_intervals

# Adjacent same-speaker segments closer than this merge into one interval.
TIMELINE_JOIN_GAP_S = 0.01


@dataclass(frozen=True)
class Timeline:
    """Per-speaker disjoint, sorted speech intervals."""

    by_speaker: dict[SpeakerId, tuple[tuple[float, float], ...]]

    @staticmethod
    def from_intervals(intervals: dict[SpeakerId, list[tuple[float, float]]]) -> "Timeline":
        return Timeline(
            by_speaker={
                spk: tuple(merge_intervals(list(ivs)))
                for spk, ivs in intervals.items()
                if ivs
            }
        )

    @staticmethod
    def from_annotation(ref: ReferenceAnnotation) -> "Timeline":
        return Timeline.from_intervals(
            {spk: list(ivs) for spk, ivs in ref.by_speaker().items()}
        )

    @staticmethod
    def from_segments(segments: list[Segment]) -> "Timeline":
        grouped: dict[SpeakerId, list[tuple[float, float]]] = {}
        for seg in segments:
            if seg.label is None:
                raise ValidationError("unlabeled segment in hypothesis", location=seg.id)
            grouped.setdefault(seg.label, []).append((seg.t_start, seg.t_end))
        return Timeline(
            by_speaker={
                spk: tuple(merge_intervals(ivs, gap=TIMELINE_JOIN_GAP_S))
                for spk, ivs in grouped.items()
            }
        )

    def speakers(self) -> list[SpeakerId]:
        return sorted(self.by_speaker)

    def total_time(self) -> float:
        return sum(e - s for ivs in self.by_speaker.values() for s, e in ivs)

    def overlap(self, speaker: SpeakerId, start: float, end: float) -> float:
        return sum(
            max(0.0, min(e, end) - max(s, start))
            for s, e in self.by_speaker.get(speaker, ())
        )


@dataclass
class MetricsReport:
    t_total: float
    t_miss: float
    t_fa: float
    t_conf: float
    miss: float
    fa: float
    conf: float
    der: float
    collar_s: float = 0.0
    mapping: str = "identity"
    im_der: float | None = None
    im_serr: float | None = None
    baseline_name: str | None = None

    def to_dict(self) -> dict:
        out = {
            "t_total": self.t_total,
            "t_miss": self.t_miss,
            "t_fa": self.t_fa,
            "t_conf": self.t_conf,
            "miss": self.miss,
            "fa": self.fa,
            "conf": self.conf,
            "der": self.der,
            "collar_s": self.collar_s,
            "mapping": self.mapping,
        }
        if self.im_der is not None:
            out["im_der"] = self.im_der
            out["im_serr"] = self.im_serr
            out["baseline"] = self.baseline_name or "baseline"
        return out

    def to_text(self) -> str:
        return "\n".join(f"{k}={v}" for k, v in self.to_dict().items())


def _boundary_points(tl: Timeline) -> list[float]:
    pts = []
    for ivs in tl.by_speaker.values():
        for s, e in ivs:
            pts.extend((s, e))
    return pts


def _pairwise_overlap(
    ref: Timeline, hyp: Timeline, scored: list[tuple[float, float]] | None
) -> dict[tuple[SpeakerId, SpeakerId], float]:
    """Scored co-occurrence time for every (ref speaker, hyp speaker) pair."""
    out: dict[tuple[SpeakerId, SpeakerId], float] = {}
    for r, rivs in ref.by_speaker.items():
        for h, hivs in hyp.by_speaker.items():
            total = 0.0
            for rs, re in rivs:
                for hs, he in hivs:
                    a, b = max(rs, hs), min(re, he)
                    if b <= a:
                        continue
                    if scored is None:
                        total += b - a
                    else:
                        total += sum(
                            max(0.0, min(b, ge) - max(a, gs)) for gs, ge in scored
                        )
            out[(r, h)] = total
    return out


def _optimal_mapping(
    ref: Timeline, hyp: Timeline, scored: list[tuple[float, float]] | None
) -> dict[SpeakerId, SpeakerId]:
    """One-to-one hyp->ref map maximizing matched speech time (exhaustive)."""
    rs = ref.speakers()
    hs = hyp.speakers()
    if max(len(rs), len(hs)) > 8:
        raise ValidationError("optimal mapping supported for up to 8 speakers")
    overlap = _pairwise_overlap(ref, hyp, scored)
    best_map: dict[SpeakerId, SpeakerId] = {}
    best_gain = -1.0
    if len(hs) <= len(rs):
        for perm in itertools.permutations(rs, len(hs)):
            gain = sum(overlap[(perm[i], hs[i])] for i in range(len(hs)))
            if gain > best_gain:
                best_gain = gain
                best_map = {hs[i]: perm[i] for i in range(len(hs))}
    else:
        for perm in itertools.permutations(hs, len(rs)):
            gain = sum(overlap[(rs[i], perm[i])] for i in range(len(rs)))
            if gain > best_gain:
                best_gain = gain
                best_map = {perm[i]: rs[i] for i in range(len(rs))}
    return best_map


def _scored_region(ref: Timeline, hyp: Timeline, collar_s: float) -> list[tuple[float, float]] | None:
    """Scoring region after excising +-collar around reference boundaries.

    None means the full axis is scored.
    """
    if collar_s <= 0:
        return None
    excluded = merge_intervals(
        [(b - collar_s, b + collar_s) for b in _boundary_points(ref)]
    )
    lo = min(_boundary_points(ref) + _boundary_points(hyp)) - 1.0
    hi = max(_boundary_points(ref) + _boundary_points(hyp)) + 1.0
    region: list[tuple[float, float]] = []
    cursor = lo
    for s, e in excluded:
        if s > cursor:
            region.append((cursor, s))
        cursor = max(cursor, e)
    if hi > cursor:
        region.append((cursor, hi))
    return region


def compute_der(
    ref: Timeline,
    hyp: Timeline,
    collar_s: float = 0.0,
    mapping: str = "identity",
) -> MetricsReport:
    """Exact miss / false alarm / confusion decomposition of DER.

    At each instant: miss = max(0, #ref - #hyp), fa = max(0, #hyp - #ref),
    conf = min(#ref, #hyp) - matched, where matched counts active hyp
    speakers whose (identity or optimal one-to-one) ref counterpart is
    active too. Overlapped speech is scored; total time is the summed
    reference speaker time.
    """
    if mapping not in ("identity", "optimal"):
        raise ValidationError(f"unknown mapping {mapping!r}")
    if not ref.by_speaker or ref.total_time() <= 0:
        raise UndefinedMetricError("reference timeline has no scored speech")

    scored = _scored_region(ref, hyp, collar_s)
    if mapping == "optimal":
        hyp_to_ref = _optimal_mapping(ref, hyp, scored)
    else:
        hyp_to_ref = {h: h for h in hyp.speakers()}

    # boundary events: (time, stream, speaker, delta); "scored" toggles
    # count as their own stream so every elementary interval is uniform
    events: list[tuple[float, int, SpeakerId, int]] = []
    for spk, ivs in ref.by_speaker.items():
        for s, e in ivs:
            events.append((s, 0, spk, 1))
            events.append((e, 0, spk, -1))
    for spk, ivs in hyp.by_speaker.items():
        for s, e in ivs:
            events.append((s, 1, spk, 1))
            events.append((e, 1, spk, -1))
    if scored is not None:
        for s, e in scored:
            events.append((s, 2, "", 1))
            events.append((e, 2, "", -1))
    events.sort(key=lambda ev: ev[0])

    r_active: set[SpeakerId] = set()
    h_active: set[SpeakerId] = set()
    in_scored = scored is None
    t_total = t_miss = t_fa = t_conf = 0.0
    idx = 0
    n_events = len(events)
    while idx < n_events:
        t0 = events[idx][0]
        while idx < n_events and events[idx][0] == t0:
            _, stream, spk, delta = events[idx]
            if stream == 0:
                (r_active.add if delta > 0 else r_active.discard)(spk)
            elif stream == 1:
                (h_active.add if delta > 0 else h_active.discard)(spk)
            else:
                in_scored = delta > 0
            idx += 1
        if idx >= n_events:
            break
        dt = events[idx][0] - t0
        if dt <= 0 or not in_scored:
            continue
        n_ref, n_hyp = len(r_active), len(h_active)
        if n_ref == 0 and n_hyp == 0:
            continue
        matched = sum(1 for h in h_active if hyp_to_ref.get(h) in r_active)
        t_total += n_ref * dt
        t_miss += max(0, n_ref - n_hyp) * dt
        t_fa += max(0, n_hyp - n_ref) * dt
        t_conf += (min(n_ref, n_hyp) - min(matched, min(n_ref, n_hyp))) * dt

    if t_total <= 0:
        raise UndefinedMetricError("no scored reference speech after collar")
    miss = t_miss / t_total
    fa = t_fa / t_total
    conf = t_conf / t_total
    return MetricsReport(
        t_total=t_total,
        t_miss=t_miss,
        t_fa=t_fa,
        t_conf=t_conf,
        miss=miss,
        fa=fa,
        conf=conf,
        der=miss + fa + conf,
        collar_s=collar_s,
        mapping=mapping,
    )


def oracle_relabel(segments: list[Segment], ref: Timeline) -> list[Segment]:
    """Best fixed-boundary labeling: per segment, the reference speaker
    with the largest temporal overlap (ties: smallest id; no overlap:
    label kept). Returns relabeled copies."""
    if not ref.by_speaker:
        raise ValidationError("reference timeline is empty")
    out: list[Segment] = []
    for seg in segments:
        overlaps = {
            spk: ref.overlap(spk, seg.t_start, seg.t_end) for spk in ref.speakers()
        }
        best = max(overlaps.values())
        copy = copy_segment(seg)
        if best > 0.0:
            copy.label = min(s for s, v in overlaps.items() if v == best)
        out.append(copy)
    return out


def relative_improvement(
    baseline: MetricsReport, system: MetricsReport
) -> tuple[float, float]:
    """Percent DER and confusion improvements of system over baseline."""
    if baseline.der <= 0 or baseline.conf <= 0:
        raise UndefinedMetricError("baseline DER and confusion must be positive")
    im_der = 100.0 * (baseline.der - system.der) / baseline.der
    im_serr = 100.0 * (baseline.conf - system.conf) / baseline.conf
    return im_der, im_serr


@dataclass(frozen=True)
class SignificanceResult:
    n: int
    mean: float
    sd: float
    t_stat: float
    p_one_sided: float

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "mean": self.mean,
            "sd": self.sd,
            "t_stat": self.t_stat,
            "p_one_sided": self.p_one_sided,
        }


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the regularized incomplete beta (Lentz)."""
    max_iter = 300
    eps = 3e-16
    fpmin = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def incomplete_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_bt = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log(1.0 - x)
    )
    bt = math.exp(ln_bt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def student_t_sf(t: float, df: float) -> float:
    """Upper-tail probability P(T >= t) for Student's t with ``df`` dof."""
    if df <= 0:
        raise ValidationError("degrees of freedom must be positive")
    x = df / (df + t * t)
    p = 0.5 * incomplete_beta(df / 2.0, 0.5, x)
    return p if t >= 0 else 1.0 - p


def one_sample_t(values: list[float]) -> SignificanceResult:
    """One-sided one-sample t-test of mean > 0 (sample sd, n-1 dof)."""
    n = len(values)
    if n < 2:
        raise DegenerateSampleError("need at least two values")
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    sd = math.sqrt(var)
    if sd == 0.0:
        raise DegenerateSampleError("sample standard deviation is zero")
    t_stat = mean / (sd / math.sqrt(n))
    return SignificanceResult(
        n=n, mean=mean, sd=sd, t_stat=t_stat, p_one_sided=student_t_sf(t_stat, n - 1)
    )
