"""Exception types shared across the package."""


class GmfgError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(GmfgError, ValueError):
    """Invalid scenario, grid, or solver configuration.

    ``problems`` holds every violation found, so callers can report all of
    them at once instead of fixing one field per run.
    """

    def __init__(self, message, problems=None):
        super().__init__(message)
        self.problems = list(problems) if problems else [message]


class DomainError(GmfgError, ValueError):
    """Input outside the mathematical domain of an operation."""


class InvariantError(GmfgError, ValueError):
    """A structural invariant of a value object is violated."""


class GridError(GmfgError, ValueError):
    """Mismatched grids, shapes, or replica counts between operands."""


class SizeError(GmfgError, ValueError):
    """Problem size exceeds a configured limit."""


class NumericalError(GmfgError, RuntimeError):
    """Non-finite values or blow-up detected during a computation."""


class ConvergenceError(GmfgError, RuntimeError):
    """An iteration failed to converge; ``trace`` carries the history."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []
