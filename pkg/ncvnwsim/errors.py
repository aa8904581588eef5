"""
Exceptions raised by ncvnwsim
"""


class NcfetSimError(Exception):
    """
    Base class for all errors raised by the simulator

    :param message: Human readable description
    :type message: str
    :param context: Sweep or experiment coordinates at which the error occurred
    :type context: dict
    """

    def __init__(self, message: str = "", context: dict = None):
        super().__init__(message)
        self.message = message
        self.context = dict(context) if context else {}

    def with_context(self, **context):
        """
        Add coordinates to the error context and return the error, so it can be re-raised
        """
        self.context.update(context)
        return self

    def __reduce__(self):
        # Errors from worker processes keep their context and subclass fields
        return _restore_error, (self.__class__, self.args, dict(self.__dict__))

    def __str__(self):
        if not self.context:
            return self.message
        ctx = ", ".join("%s=%s" % (k, v) for k, v in self.context.items())
        return "%s [%s]" % (self.message, ctx)


def _restore_error(cls, args, state):
    err = cls.__new__(cls)
    Exception.__init__(err, *args)
    err.__dict__.update(state)
    return err


class NonConvergence(NcfetSimError, RuntimeError):
    """A nonlinear solve did not reach its tolerance"""


class InvalidInput(NcfetSimError, ValueError):
    """An argument violates an operation precondition"""


class OutOfRange(NcfetSimError, ValueError):
    """A requested value lies outside the data range"""


class WindowEmpty(NcfetSimError, ValueError):
    """No data points fall inside the requested current window"""


class CriterionNotCrossed(NcfetSimError, ValueError):
    """The table never crosses the threshold criterion current"""


class PredicateNotBracketed(NcfetSimError, ValueError):
    """A bisection predicate has the same value at both search bounds"""


class NoCrossing(NcfetSimError, ValueError):
    """Two sweep curves do not intersect in the sweep window"""


class DegenerateVtc(NcfetSimError, ValueError):
    """A transfer curve has no pair of unity-gain points"""


class NoOscillation(NcfetSimError, ValueError):
    """A transient trace has too few output transitions to measure"""


class ParseError(NcfetSimError, ValueError):
    """
    The config file could not be parsed

    :param line: 1-based line of the error (None if unknown)
    :param column: 1-based column of the error (None if unknown)
    """

    def __init__(self, message: str, line: int = None, column: int = None):
        position = {"line": line, "column": column}
        super().__init__(message, {k: v for k, v in position.items() if v is not None})
        self.line = line
        self.column = column


class ValidationError(NcfetSimError, ValueError):
    """
    A config value violates a constraint

    :param key: Dotted config key, e.g. ``ferro.t_fe_nm``
    :param constraint: Description of the violated constraint
    """

    def __init__(self, key: str, constraint: str):
        super().__init__("Invalid value for %s: %s" % (key, constraint), {"key": key})
        self.key = key
        self.constraint = constraint


class IoError(NcfetSimError, OSError):
    """Writing an output file failed"""
