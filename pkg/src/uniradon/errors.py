"""Exception hierarchy shared by every module."""


class RadonError(Exception):
    """Base class for toolkit errors."""


class InputError(RadonError, ValueError):
    """A precondition on the inputs does not hold."""


class CapabilityError(RadonError):
    """The requested combination is not supported by this code path."""


class NumericError(RadonError, ArithmeticError):
    """A numerical procedure failed to converge."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
