"""Exception hierarchy.

``ValidationError`` subclasses are user-correctable problems (bad input,
missing predecessor step) and map to CLI exit code 1. Everything else that
escapes a pipeline step is a runtime failure (exit code 2).
"""


class ASDError(Exception):
    """Base class for all errors raised by asdpipe."""


class ValidationError(ASDError, ValueError):
    """Input violates a documented contract."""


class ManifestParseError(ValidationError):
    def __init__(self, path, lineno, msg):
        self.path = path
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {msg}")


class ManifestValidationError(ValidationError):
    def __init__(self, clip_id, msg):
        self.clip_id = clip_id
        super().__init__(f"clip {clip_id!r}: {msg}")


class WavFormatError(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class MarkerError(ValidationError):
    """A pipeline step was asked to run before its predecessor completed."""


class UnevaluableUnitError(ValidationError):
    def __init__(self, unit, msg):
        self.unit = unit
        super().__init__(f"unit {unit}: {msg}")


class CorruptionError(ASDError):
    """Stored bytes do not match their recorded size or hash."""


class NonFiniteGradientError(ASDError, FloatingPointError):
    pass
