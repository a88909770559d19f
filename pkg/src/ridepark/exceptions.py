"""Exception hierarchy shared by the solver, optimizer and CLI."""


class RideparkError(Exception):
    """Base class for all package errors."""


class DomainError(RideparkError, ValueError):
    """An input lies outside the domain of a model function."""


class InstabilityError(DomainError):
    """The matching queue is unstable (occupancy rho >= 1)."""


class ConvergenceError(RideparkError):
    """An iterative solve exhausted its budget.

    ``residuals`` holds the last residuals seen, when available.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class InfeasibleError(RideparkError):
    """No admissible market point exists for the requested prices."""


class SimulationOverflowError(RideparkError):
    """The simulated passenger queue exceeded its configured cap."""


class MultipleEquilibriaWarning(RuntimeWarning):
    """More than one fixed point was found for the same prices."""
