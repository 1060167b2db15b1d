"""Human-in-the-loop speaker diarization correction toolkit."""

from .enrollment import AssignmentTrace, EnrollmentPool, assign_speaker
from .engine import Engine, Toggles, replay_audit
from .errors import DiarloopError
from .metrics import (
    MetricsReport,
    SignificanceResult,
    Timeline,
    compute_der,
    one_sample_t,
    oracle_relabel,
    relative_improvement,
)
from .model import (
    ReferenceAnnotation,
    Revision,
    Segment,
    SessionConfig,
    Transcript,
    Word,
    cosine,
    normalize,
)
from .session import Session, open_session
from .simulator import RunSpec, RunResult, run_baseline, run_meeting, sweep
from .swm import SplitResult, bin_votes, collect_votes, split_when_merged
from .synth import SynthParams, standard_suite, synth_meeting

__version__ = "0.1.0"

__all__ = [
    "AssignmentTrace",
    "DiarloopError",
    "Engine",
    "EnrollmentPool",
    "MetricsReport",
    "ReferenceAnnotation",
    "Revision",
    "RunResult",
    "RunSpec",
    "Segment",
    "Session",
    "SessionConfig",
    "SignificanceResult",
    "SplitResult",
    "SynthParams",
    "Timeline",
    "Toggles",
    "Transcript",
    "Word",
    "assign_speaker",
    "bin_votes",
    "collect_votes",
    "compute_der",
    "cosine",
    "normalize",
    "one_sample_t",
    "open_session",
    "oracle_relabel",
    "relative_improvement",
    "replay_audit",
    "run_baseline",
    "run_meeting",
    "split_when_merged",
    "standard_suite",
    "sweep",
    "synth_meeting",
]
