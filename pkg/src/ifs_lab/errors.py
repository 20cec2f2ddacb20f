"""Exception types shared across the package."""


class IfsLabError(Exception):
    """Base class for all errors raised by ifs_lab."""


class DimensionError(IfsLabError, ValueError):
    """Operands live in spaces of different dimension."""


class BudgetError(IfsLabError):
    """A point, atom, word or solver budget would be exceeded."""


class InvarianceError(IfsLabError):
    """A map sends a point outside the working box."""


class NotFairError(IfsLabError, ValueError):
    """A parameter measure gives zero mass to some ball."""


class NonConvergenceError(IfsLabError):
    """An iteration did not meet its tolerance within the step limit.

    ``trace`` holds whatever was recorded before giving up and ``last_gap`` the
    final convergence gap.
    """

    def __init__(self, message, trace=None, last_gap=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []
        self.last_gap = last_gap
