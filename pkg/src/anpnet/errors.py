"""Exception hierarchy shared across the package."""


class ShapeError(ValueError):
    """Array or vector dimensions do not match what the model expects."""


class FormatError(ValueError):
    """Base class for malformed binary or text inputs."""


class BadMagicError(FormatError):
    pass


class VersionError(FormatError):
    pass


class TruncatedError(FormatError):
    pass


class DimensionError(FormatError):
    """Header dimensions disagree with the vocabulary or with stored counts."""


class NonFiniteError(FormatError):
    pass


class ParseError(FormatError):
    """Text-file parse failure; carries the offending line number."""

    def __init__(self, message, line=None, path=None):
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)
        self.line = line
        self.path = path


class ConfigError(ValueError):
    """Missing or malformed configuration key; ``key`` names it."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class TrainingError(FloatingPointError):
    """Raised when training hits a non-finite loss or gradient."""


class StaleRecordError(RuntimeError):
    """A forward record does not belong to the parameters it is used with."""
