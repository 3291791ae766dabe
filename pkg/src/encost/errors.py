"""Exception hierarchy shared by all encost modules."""


class EncostError(Exception):
    """Base class for all toolkit errors."""


class FormatError(EncostError):
    """Input bytes do not follow the expected file format."""


class UnsupportedFormatError(FormatError):
    pass


class DegenerateInputError(EncostError):
    """Input is well formed but too small for the requested computation."""


class EmptyInputError(DegenerateInputError):
    pass


class DomainError(EncostError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class ConfigurationError(EncostError):
    pass


class JoinError(ConfigurationError):
    def __init__(self, message, missing=()):
        super().__init__(message)
        self.missing = sorted(missing)


class RankDeficiencyError(EncostError):
    pass


class RangeError(EncostError, ValueError):
    pass


class InsufficientSamplesError(EncostError, ValueError):
    pass
