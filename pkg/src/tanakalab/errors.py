"""Exception types shared across the package."""


class TanakaLabError(Exception):
    pass


class OutOfRangeError(TanakaLabError, ValueError):
    """A time argument falls outside the grid span of a path."""


class GridMismatchError(TanakaLabError, ValueError):
    """Two paths that must share a time grid do not."""


class HorizonError(TanakaLabError):
    """A level or clock value was not reached before the grid ends.

    ``attained`` carries the largest value that was reached.
    """

    def __init__(self, message, attained=None):
        super().__init__(message)
        self.attained = attained


class EnvelopeError(TanakaLabError, ValueError):
    """Envelope invariants (f(0) = g(0), f <= g) or admissibility violated."""


class ClockError(TanakaLabError, ValueError):
    """A time change is not nondecreasing or cannot be synchronized."""


class ConfigError(TanakaLabError, ValueError):
    """Invalid experiment configuration."""
