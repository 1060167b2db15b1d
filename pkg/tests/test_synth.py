import numpy as np
import pytest

from diarloop.bundles import serialize_segments
from diarloop.errors import GenerationError
from diarloop.synth import SynthParams, standard_suite, synth_meeting


class TestSynthMeeting:
    def test_deterministic_given_seed(self):
        a = synth_meeting(SynthParams(duration_s=90.0, merge_rate=0.3, confusion_rate=0.2, seed=9))
        b = synth_meeting(SynthParams(duration_s=90.0, merge_rate=0.3, confusion_rate=0.2, seed=9))
        assert serialize_segments(a.segments, a.votes) == serialize_segments(b.segments, b.votes)
        assert a.reference == b.reference
        assert a.truth_lines == b.truth_lines
        for spk in a.seeds:
            assert np.array_equal(a.seeds[spk][0], b.seeds[spk][0])

    def test_different_seeds_differ(self):
        a = synth_meeting(SynthParams(duration_s=90.0, seed=1))
        b = synth_meeting(SynthParams(duration_s=90.0, seed=2))
        assert serialize_segments(a.segments) != serialize_segments(b.segments)

    def test_no_merges_means_reference_boundaries(self):
        bundle = synth_meeting(SynthParams(duration_s=120.0, merge_rate=0.0, seed=3))
        ref_bounds = sorted((s, s + d) for s, d, _ in bundle.reference.intervals)
        hyp_bounds = sorted((seg.t_start, seg.t_end) for seg in bundle.segments)
        assert hyp_bounds == pytest.approx(ref_bounds)

    def test_speaker_alternation_and_coverage(self):
        bundle = synth_meeting(SynthParams(duration_s=300.0, seed=4))
        intervals = sorted(bundle.reference.intervals)
        speakers = [spk for _, _, spk in intervals]
        assert all(a != b for a, b in zip(speakers, speakers[1:]))
        assert set(speakers) == set(bundle.speakers)

    def test_votes_cover_each_long_segment(self):
        params = SynthParams(duration_s=120.0, seed=5)
        bundle = synth_meeting(params)
        for seg in bundle.segments:
            votes = bundle.votes[seg.id]
            if seg.duration >= params.window_s:
                assert votes
                assert votes[0][0] == pytest.approx(seg.t_start + params.window_s)
            else:
                assert votes == []

    def test_merge_fraction_matches_rate(self):
        """Monte-Carlo on the generator itself: multi-speaker segment
        fraction tracks the merge rate."""
        multi = 0
        total = 0
        for seed in range(50):
            bundle = synth_meeting(
                SynthParams(duration_s=600.0, merge_rate=0.3, seed=1000 + seed)
            )
            for seg in bundle.segments:
                speakers_hit = {
                    spk
                    for start, dur, spk in bundle.reference.intervals
                    if start < seg.t_end and start + dur > seg.t_start
                }
                multi += len(speakers_hit) > 1
                total += 1
        assert multi / total == pytest.approx(0.3, abs=0.05)

    def test_infeasible_params(self):
        with pytest.raises(GenerationError):
            synth_meeting(SynthParams(turn_min_s=100.0, duration_s=10.0))
        with pytest.raises(GenerationError):
            synth_meeting(SynthParams(n_speakers=1))
        with pytest.raises(GenerationError):
            synth_meeting(SynthParams(merge_rate=1.5))
        with pytest.raises(GenerationError):
            synth_meeting(SynthParams(turn_min_s=5.0, turn_max_s=2.0))

    def test_truth_lines_match_turns(self):
        bundle = synth_meeting(SynthParams(duration_s=60.0, seed=6))
        assert len(bundle.truth_lines) == len(bundle.reference.intervals)
        for (_, _, spk), line in zip(sorted(bundle.reference.intervals), bundle.truth_lines):
            assert line.startswith(f"{spk}: ")


def test_standard_suite_shape():
    bundles = standard_suite(n_meetings=2, duration_s=120.0)
    assert len(bundles) == 2
    assert bundles[0].meeting_id != bundles[1].meeting_id
    assert all(len(b.speakers) == 4 for b in bundles)
