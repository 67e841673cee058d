"""Exception hierarchy shared by every module.

The CLI maps ``ValidationError`` (and its subclasses) to exit code 1 and
everything else to exit code 2.
"""


class GlanceError(Exception):
    pass


class ValidationError(GlanceError, ValueError):
    """Bad input: malformed files, out-of-range arguments, invalid graphs."""


class DimensionError(ValidationError):
    """Operand shapes do not agree."""


class ParseError(ValidationError):
    def __init__(self, path, line_no, message):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class UndefinedStatisticError(ValidationError):
    pass


class UsageError(GlanceError, TypeError):
    """An API was called in a way it does not support."""


class NonFiniteError(GlanceError, FloatingPointError):
    """A loss, gradient, or parameter stopped being finite during training."""
