"""
Exception hierarchy. Each error carries the CLI exit code it maps to.
"""


class SgaError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 2


class UsageError(SgaError):
    """Invalid flags, config keys or argument values."""

    exit_code = 1


class DataError(SgaError):
    """Input data is malformed or inconsistent."""

    exit_code = 2


class InvalidCoordinateError(DataError, ValueError):
    pass


class InvalidVectorError(DataError, ValueError):
    pass


class InvalidDimensionsError(DataError, ValueError):
    pass


class DimensionMismatchError(DataError, ValueError):
    pass


class InvalidLabelError(DataError, ValueError):
    pass


class UnsupportedFormatError(DataError):
    pass


class ManifestError(DataError):
    pass


class DuplicateSampleError(ManifestError):
    pass


class UndefinedMetricError(DataError, ValueError):
    """A metric has no defined value, e.g. no evaluated pixels."""


class EmptyInputError(DataError, ValueError):
    pass


class PredictorError(SgaError):
    """A predictor failed to produce a prediction."""

    exit_code = 3
