"""
Error hierarchy.

DataError subclasses map to CLI exit code 3, NumericalError subclasses to exit
code 4; ConfigError is a usage problem (exit code 2).
"""


class EmotionLabError(Exception):
    """Root of every error raised by the library."""


class DataError(EmotionLabError, ValueError):
    """Input data cannot be processed."""


class EmptyDataset(DataError):
    pass


class InvalidSpec(DataError):
    pass


class UnknownId(DataError):
    pass


class EmptySequence(DataError):
    pass


class EmptyCorpus(DataError):
    pass


class LabelOutOfRange(DataError):
    pass


class LengthMismatch(DataError):
    pass


class EmptyMatrix(DataError):
    pass


class UnknownBenchmarkClass(DataError):
    pass


class DegenerateSample(DataError):
    pass


class SizeTooLarge(DataError):
    pass


class IndexOutOfRange(DataError):
    pass


class ShapeMismatch(EmotionLabError, ValueError):
    pass


class NotScalar(EmotionLabError, ValueError):
    pass


class ConfigError(EmotionLabError, ValueError):
    """Configuration combination that the requested operation does not support."""


class NumericalError(EmotionLabError, ArithmeticError):
    pass


class NonFiniteValue(NumericalError):
    """A forward op produced NaN or Inf."""
