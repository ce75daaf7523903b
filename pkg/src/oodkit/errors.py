"""Exception types raised by the toolkit.

Everything derives from :class:`OodkitError` so callers (and the CLI) can
distinguish validation failures from genuine I/O errors, which are left as
plain ``OSError``.
"""


class OodkitError(Exception):
    """Base class for all toolkit validation errors."""


class EmptyInput(OodkitError):
    pass


class DimensionMismatch(OodkitError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NotSymmetric(OodkitError):
    pass


class NoConvergence(OodkitError):
    pass


class ZeroVector(OodkitError):
    pass


class MissingClassMean(OodkitError):
    pass


class InvalidConfig(OodkitError):
    pass


class ParseError(OodkitError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class LabelOutOfRange(OodkitError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TooFewClasses(OodkitError):
    pass


class UnknownClass(OodkitError):
    pass


class BatchTooSmall(OodkitError):
    pass


class InvalidShape(OodkitError):
    pass


class ShapeMismatch(OodkitError):
    pass


class StepsExhausted(OodkitError):
    pass


class DegenerateRepresentation(OodkitError):
    pass


class NotNormalized(OodkitError):
    pass


class NoPositivePairs(OodkitError):
    pass


class NotADistribution(OodkitError):
    pass


class MissingClass(OodkitError):
    pass


class FormatError(OodkitError):
    pass


class LengthMismatch(OodkitError):
    pass


class ConfigError(OodkitError):
    pass


class DivergenceError(OodkitError):
    def __init__(self, message: str, step: int | None = None):
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)
        self.step = step
