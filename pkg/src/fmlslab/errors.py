"""Exception types shared across the pricing laboratory.

The CLI maps these onto process exit codes: configuration problems exit
with 2, numerical-accuracy or convergence failures with 3, and ordinary
property-check failures (no exception, just a failed report) with 1.
"""


class PricingError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(PricingError, ValueError):
    """An input lies outside the mathematical domain of an operation."""


class ConfigurationError(PricingError, ValueError):
    """A run configuration or grid specification is invalid.

    Carries an optional ``suggestion`` describing how to fix the setup
    (for example, the required grid-window size).
    """

    def __init__(self, message: str, suggestion: str | None = None):
        super().__init__(message)
        self.suggestion = suggestion


class NumericalAccuracyError(PricingError):
    """A numerical routine could not meet its accuracy target.

    ``achieved`` holds the best error estimate that was reached, when
    one is available.
    """

    def __init__(self, message: str, achieved: float | None = None):
        super().__init__(message)
        self.achieved = achieved


class ConvergenceError(PricingError):
    """An iterative refinement hit its cap before meeting tolerance.

    ``last_increment`` holds the final observed change.
    """

    def __init__(self, message: str, last_increment: float | None = None):
        super().__init__(message)
        self.last_increment = last_increment


class ContractSupportError(PricingError):
    """A grid function was evaluated outside its declared support."""
