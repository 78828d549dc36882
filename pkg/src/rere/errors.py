"""Exception hierarchy.

Every error raised by the package derives from :class:`ReReError`; the
subclasses also derive from the builtin that best matches so callers can
catch ``ValueError`` without importing this module.
"""


class ReReError(Exception):
    pass


class InvalidConfigError(ReReError, ValueError):
    pass


class InvalidInputError(ReReError, ValueError):
    pass


class EmptyHistoryError(ReReError, RuntimeError):
    """No AARE entry is eligible for a threshold (a caller bug)."""


class InternalStateError(ReReError, RuntimeError):
    pass


class SequencingError(ReReError, ValueError):
    """Time indices did not arrive strictly increasing from zero."""


class ParseError(ReReError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class OrderingError(ParseError):
    pass


class LabelRangeError(ReReError, ValueError):
    pass


class ResolutionError(ReReError, ValueError):
    pass


class UndefinedMetricError(ReReError, ValueError):
    pass
