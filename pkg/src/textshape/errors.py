"""Exception hierarchy shared by every module.

CLI exit codes follow the class: ``ConfigError`` exits 2, ``IoError`` exits 3,
any other ``TextShapeError`` exits 1.
"""


class TextShapeError(Exception):
    """Base class for domain errors."""

    exit_code = 1


class ConfigError(TextShapeError, ValueError):
    exit_code = 2


class IoError(TextShapeError, OSError):
    exit_code = 3


class FormatError(TextShapeError, ValueError):
    """Malformed input file contents."""


class EmptyInput(TextShapeError, ValueError):
    pass


class NoEmbeddableContent(TextShapeError, ValueError):
    pass


class TooFewWindows(TextShapeError, ValueError):
    pass


class Degenerate(TextShapeError, ValueError):
    pass


class NoConvergence(TextShapeError, RuntimeError):
    pass


class UndefinedRatio(TextShapeError, ValueError):
    pass


class ZeroEdit(TextShapeError, ValueError):
    pass


class NoCandidate(TextShapeError, LookupError):
    pass


class EditorError(TextShapeError, RuntimeError):
    pass


class ZeroTarget(TextShapeError, ZeroDivisionError):
    pass
