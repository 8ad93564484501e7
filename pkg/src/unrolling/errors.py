"""Exception types raised across the package."""


class UnrollingError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(UnrollingError, ValueError):
    pass


class SingularMatrix(UnrollingError, ArithmeticError):
    pass


class NotSymmetric(UnrollingError, ValueError):
    pass


class NoConvergence(UnrollingError, RuntimeError):
    pass


class NonFiniteIterate(UnrollingError, FloatingPointError):
    """An iterate picked up a NaN or Inf, usually because the step size is too large."""


class NoTape(UnrollingError, ValueError):
    """The trajectory was recorded without intermediate iterates."""


class IndexOutOfRange(UnrollingError, IndexError):
    pass


class EmptySeries(UnrollingError, ValueError):
    pass


class NotAContraction(UnrollingError, ValueError):
    pass


class InvalidRange(UnrollingError, ValueError):
    pass


class MismatchedConfig(UnrollingError, ValueError):
    pass


class EmptyGroup(UnrollingError, ValueError):
    pass


class DegenerateObjective(UserWarning):
    """Both terms of the truncation objective vanish, so every T is optimal."""
