"""Exception hierarchy shared by all evface modules."""


class EvfaceError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(EvfaceError, ValueError):
    pass


class GeometryError(EvfaceError, ValueError):
    pass


class PointAtInfinityError(GeometryError):
    def __init__(self, index):
        self.index = index
        super().__init__(f"point {index} maps to infinity (w' = 0)")


class StateError(EvfaceError, ValueError):
    pass


class DataError(EvfaceError, ValueError):
    pass


class CorruptionError(DataError):
    pass


class DegenerateAnnotationError(DataError):
    pass


class DegenerateBoxError(DataError):
    pass


class ParseError(DataError):
    """Malformed text input; carries the 1-based line number."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        if path is not None and line is not None:
            where = f"{path}:{line}: "
        elif path is not None:
            where = f"{path}: "
        elif line is not None:
            where = f"line {line}: "
        else:
            where = ""
        super().__init__(where + message)


class UnknownClassError(ParseError):
    pass


class RangeError(ParseError):
    pass


class EvaluationError(EvfaceError, ValueError):
    pass


class UnknownFileTypeError(EvfaceError, ValueError):
    pass


# EVS1 binary diagnostics, one class per failure mode.


class FormatError(DataError):
    pass


class SerializationError(FormatError):
    pass


class BadMagicError(FormatError):
    pass


class HeaderError(FormatError):
    pass


class TruncatedError(FormatError):
    def __init__(self, message, offset):
        self.offset = offset
        super().__init__(f"{message} at byte offset {offset}")


class CountMismatchError(FormatError):
    pass


class TrailingBytesError(FormatError):
    pass


class OutOfBoundsError(FormatError):
    pass


class TimestampOrderError(FormatError):
    pass


class PolarityError(FormatError):
    pass
