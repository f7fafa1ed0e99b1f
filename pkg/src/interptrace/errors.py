"""Exception hierarchy shared by all modules.

Every error raised on purpose by the library derives from
:class:`InterptraceError`, so callers (and the CLI) can separate numerical
verdicts from programming mistakes.
"""


class InterptraceError(Exception):
    """Base class for library errors."""


class ParameterError(InterptraceError, ValueError):
    """A scalar parameter lies outside its admissible range."""


class PreconditionError(InterptraceError):
    """A mathematical precondition of an operation is not satisfied."""


class EvaluationError(InterptraceError):
    """A user supplied function returned a non-finite or invalid value."""


class DivergenceError(InterptraceError):
    """A quadrature tail does not decay.

    Attributes
    ----------
    end : str
        ``"lower"`` (towards 0) or ``"upper"`` (towards infinity).
    """

    def __init__(self, message, end):
        super().__init__(message)
        self.end = end


class TruncationError(InterptraceError):
    """Sampled data do not decay enough for a tail to be truncated."""


class InsufficientDataError(InterptraceError):
    """Too few samples for a fit."""


class MonotonicityError(InterptraceError):
    """A function expected to be monotone is not monotone on its grid."""


class DomainError(InterptraceError, ValueError):
    """A query lies outside the range covered by a function."""


class RangeError(DomainError):
    """A generalized-inverse query lies outside the achievable interval.

    Attributes
    ----------
    achievable : tuple of float
        The closed interval of values that can be inverted.
    """

    def __init__(self, message, achievable):
        super().__init__(message)
        self.achievable = achievable


class NotExtendableError(PreconditionError):
    """A kernel fails the two-sided scaling bound required for extension.

    Attributes
    ----------
    side : str
        ``"lower"`` or ``"upper"``: which exponent bound is violated.
    """

    def __init__(self, message, side):
        super().__init__(message)
        self.side = side


class BudgetError(InterptraceError):
    """A Monte Carlo sample budget is too small."""


class CutoffError(ParameterError):
    """The compound Poisson cutoff is so large that no jumps remain."""


class UnsupportedError(InterptraceError):
    """The requested operation is not available for this object kind."""


class GridError(ParameterError):
    """A grid violates a structural requirement (size, ordering)."""
