"""Exception types raised across the package.

Everything derives from :class:`HistkitError` so callers can catch one base.
Most classes also subclass ``ValueError`` since they flag bad inputs.
"""


class HistkitError(Exception):
    """Base class for all errors raised by this package."""


class InvalidBreaksError(HistkitError, ValueError):
    """Break sequence is not finite, too short, or not strictly increasing."""


class OutOfRangeError(HistkitError, ValueError):
    """A sample falls outside the break range (or is not finite)."""


class IncompatibleBreaksError(HistkitError, ValueError):
    """Two histograms cannot be merged because their breaks differ."""


class IncompatibleAnnotationError(HistkitError, ValueError):
    """Moment annotations are missing, mismatched, or inconsistent."""


class EmptyHistogramError(HistkitError, ValueError):
    """A statistic was requested from a histogram with zero total count."""


class ShapeError(HistkitError, ValueError):
    """A sequence has the wrong length or an index is out of bounds."""


class DomainError(HistkitError, ValueError):
    """A scalar argument lies outside its documented domain."""


class InfeasibleMomentsError(HistkitError, ValueError):
    """No distribution on the bin can realize the given moments."""


class UnsupportedLayoutError(HistkitError, ValueError):
    """The histogram's bin layout does not support the requested operation."""


class UnsupportedCombinationError(HistkitError, ValueError):
    """The requested option combination is not supported."""


class WireError(HistkitError):
    """Base class for binary codec failures."""


class WireFormatError(WireError):
    """Bad magic, unknown version, invalid flags, or trailing bytes."""


class WireTruncationError(WireError):
    """Input ended before the envelope was complete.

    ``offset`` is the byte position at which more data was expected.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class WireCorruptionError(WireError):
    """CRC32 trailer does not match the payload."""


class WireContentError(WireError):
    """Structurally valid envelope whose payload violates histogram invariants."""


class JsonFormatError(HistkitError, ValueError):
    """JSON document does not match the histogram schema.

    ``path`` points at the offending location, e.g. ``$.counts[3]``.
    """

    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{message} (at {path})")
        self.path = path


class DtraceParseError(HistkitError, ValueError):
    """DTrace text could not be parsed; ``line_number`` locates the problem."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number
