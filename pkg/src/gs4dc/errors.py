"""Exception hierarchy shared across the codec."""


class Gs4dcError(Exception):
    """Base class for all codec errors."""


class FormatError(Gs4dcError):
    """Malformed interchange file or container."""


class BadMagicError(FormatError):
    pass


class VersionError(FormatError):
    pass


class TruncatedError(FormatError):
    pass


class ChecksumError(FormatError):
    pass


class ShapeError(Gs4dcError):
    """Tensor shapes do not chain or do not match a declared layout."""


class SymbolRangeError(Gs4dcError):
    """A symbol fell outside the alphabet of its coding distribution."""


class TrainingDivergedError(Gs4dcError):
    """Optimization produced a non-finite loss; carries the trace so far."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
