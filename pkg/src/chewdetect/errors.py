"""Exception hierarchy.

ValidationError subclasses map to CLI exit code 2, everything else derived
from ChewDetectError maps to exit code 3.
"""


class ChewDetectError(Exception):
    pass


class ValidationError(ChewDetectError):
    pass


class WavFormatError(ValidationError):
    pass


class DecodeUnsupportedError(WavFormatError):
    pass


class RateMismatchError(ValidationError):
    pass


class AnnotationError(ValidationError):
    pass


class ManifestError(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class DimensionError(ValidationError):
    pass


class ConvergenceError(ChewDetectError):
    pass
