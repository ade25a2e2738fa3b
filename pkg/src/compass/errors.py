"""Exception types shared across the compass package."""

from __future__ import annotations


class CompassError(Exception):
    """Base class for all compass errors."""


class ParseError(CompassError):
    """A catalog file or row could not be parsed. Carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DuplicateIdError(CompassError):
    def __init__(self, course_id: str, line: int | None = None):
        loc = f" (line {line})" if line is not None else ""
        super().__init__(f"duplicate course_id {course_id!r}{loc}")
        self.course_id = course_id


class DimensionMismatchError(CompassError):
    def __init__(self, expected: int, got: int, where: str = ""):
        suffix = f" for {where}" if where else ""
        super().__init__(f"expected dimension {expected}, got {got}{suffix}")
        self.expected = expected
        self.got = got


class ZeroVectorError(CompassError):
    """A vector with zero (or non-finite) Euclidean norm where a direction is required."""


class NonFiniteVectorError(CompassError):
    """A vector containing NaN or Inf components."""


class MissingEmbeddingError(CompassError):
    def __init__(self, course_id: str):
        super().__init__(f"course {course_id!r} has no embedding")
        self.course_id = course_id


class EmptyCourseError(CompassError):
    def __init__(self, course_id: str):
        super().__init__(f"course {course_id!r} has neither title nor description to embed")
        self.course_id = course_id


class UnknownSubjectError(CompassError):
    def __init__(self, subject: str):
        super().__init__(f"no embedded courses for subject {subject!r}")
        self.subject = subject


class ZeroMeanError(CompassError):
    def __init__(self, subject: str):
        super().__init__(f"mean embedding for subject {subject!r} has zero norm")
        self.subject = subject


class ProviderError(CompassError):
    """A chat/embedding provider failed after bounded retries.

    ``stage`` tags which pipeline phase was talking to the provider when it
    failed (e.g. "ideal-description", "query-embedding", "recommendation").
    """

    def __init__(self, message: str, stage: str | None = None):
        if stage:
            message = f"[{stage}] {message}"
        super().__init__(message)
        self.stage = stage


class AuthError(ProviderError):
    pass


class RateLimitedError(ProviderError):
    pass


class ProviderTimeoutError(ProviderError):
    pass


class MalformedResponseError(ProviderError):
    pass


class EmptyTextError(CompassError):
    """Embedding was requested for empty text."""


class EmptyCorpusError(CompassError):
    """A level filter left no courses to recommend from."""


class ParseFailureError(CompassError):
    """No recommendation blocks could be recovered from model output.

    ``raw_output`` keeps the unparseable text for diagnostics.
    """

    def __init__(self, message: str, raw_output: str = ""):
        super().__init__(message)
        self.raw_output = raw_output
