"""Exception types shared across the package."""


class DiarloopError(Exception):
    """Base class for all package errors."""


class DegenerateEmbeddingError(DiarloopError):
    """Embedding has zero norm or non-finite entries."""


class NoEnrollmentsError(DiarloopError):
    """Assignment requested against an empty enrollment pool."""


class UnknownSpeakerError(DiarloopError):
    """Speaker id is not part of the session's speaker set."""


class ValidationError(DiarloopError):
    """Input data violates a structural invariant.

    ``location`` pins the failure to a file line, segment id or field
    so ingest errors are actionable.
    """

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        super().__init__(f"{message} (at {location})" if location else message)


class ParseFailureError(DiarloopError):
    """Gateway output could not be parsed into a correction, after retry."""


class TargetNotFoundError(DiarloopError):
    """No transcript line matched the correction's sentence."""


class StaleCorrectionError(DiarloopError):
    """Correction targets a segment whose label already changed."""


class GatewayError(DiarloopError):
    """Text gateway transport or protocol failure."""


class UndefinedMetricError(DiarloopError):
    """Metric is undefined for the given input (e.g. empty reference)."""


class DegenerateSampleError(DiarloopError):
    """Statistic is undefined for the sample (e.g. zero variance)."""


class GenerationError(DiarloopError):
    """Synthetic meeting parameters are infeasible."""
