"""Exception hierarchy shared across the package."""


class SlowlightError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(SlowlightError):
    """A user-supplied parameter violates a documented precondition."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class ConfigError(SlowlightError):
    """Run configuration file is missing, malformed, or inconsistent."""


class DataError(SlowlightError):
    """Measured/loaded data violates an invariant (shape, sign, ordering)."""


class ParseError(DataError):
    """A data file could not be parsed; carries the offending line number."""

    def __init__(self, path, line_number: int, message: str):
        self.path = path
        self.line_number = line_number
        super().__init__(f"{path}:{line_number}: {message}")


class NumericalError(SlowlightError):
    """A numerical routine failed (singular matrix, eigensolver breakdown)."""


class FitConvergenceError(NumericalError):
    """Nonlinear least squares failed to converge.

    Carries the best parameters seen, the residual norm at that point and
    the cost history so callers can report partial results.
    """

    def __init__(self, message, best_params=None, residual_norm=None, cost_history=None):
        self.best_params = best_params
        self.residual_norm = residual_norm
        self.cost_history = list(cost_history) if cost_history is not None else []
        super().__init__(message)
