"""Exception types raised across the toolkit."""


class ElvcError(Exception):
    """Base class for every error raised by elvc."""


class UnsupportedFormat(ElvcError):
    pass


class BadSampleRate(ElvcError):
    pass


class ParseError(ElvcError):
    pass


class BadMagic(ElvcError):
    pass


class TruncatedFile(ElvcError):
    pass


class ShapeError(ElvcError, ValueError):
    pass


class InputTooShort(ElvcError, ValueError):
    pass


class EmptyInput(ElvcError, ValueError):
    pass


class IndexOutOfBounds(ElvcError, IndexError):
    pass


class BadDim(ElvcError, ValueError):
    pass


class ModeMismatch(ElvcError, ValueError):
    pass


class EmptyDataset(ElvcError, ValueError):
    pass


class ConfigError(ElvcError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key
