"""Exception hierarchy for the package."""


class DarmoisError(Exception):
    """Base class for all errors raised by this package."""


class GroupMismatchError(DarmoisError, ValueError):
    """Objects living on different groups were combined."""


class OutOfGridError(DarmoisError, KeyError):
    """A tabulated function was evaluated at a point outside its grid."""


class NotPositiveDefiniteError(DarmoisError, ValueError):
    """A matrix or characteristic function failed a positivity check."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class InadmissibleParametersError(NotPositiveDefiniteError):
    """Construction parameters do not yield a pair of probability measures."""


class DecompositionError(DarmoisError, ValueError):
    """A least-squares decomposition failed its preconditions or residual bound."""


class InvariantViolationError(DarmoisError, ValueError):
    """Parameters break a structural requirement of the construction."""
