"""Exception hierarchy shared across the toolkit."""


class VadError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(VadError):
    """Invalid parameter value or inconsistent configuration."""


class DataError(VadError):
    """Input data is missing or unusable for the requested operation."""


class FormatError(VadError):
    """A file on disk does not match its expected binary/text format."""


class EmptyInputError(DataError):
    """An operation received an empty signal or spectrogram."""


class InvalidDataError(DataError):
    """Input data violates a basic contract (non-finite values, silence, ...)."""


class AssemblyError(DataError):
    """Clip assembly could not reach the requested speech-content class."""


class UndefinedMetricError(DataError):
    """A metric is undefined for the given inputs (e.g. single-class truth)."""
