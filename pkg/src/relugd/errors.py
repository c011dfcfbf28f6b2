"""Exception types shared across the package."""


class RelugdError(Exception):
    """Base class for all errors raised by :mod:`relugd`."""


class DomainError(RelugdError, ValueError):
    """An argument lies outside the domain of the operation."""


class DimensionError(RelugdError, ValueError):
    """Array shapes are mutually inconsistent."""


class ContractError(RelugdError, ValueError):
    """A documented precondition on an input object does not hold."""


class SchemaError(RelugdError, ValueError):
    """A serialized document has an unknown or malformed schema."""


class DataGenerationError(RelugdError, RuntimeError):
    """A dataset satisfying the requested constraints could not be produced."""


class DivergenceError(RelugdError, RuntimeError):
    """Gradient descent produced a non-finite or exploding risk.

    Attributes
    ----------
    step : int
        Index of the first step at which the guard fired.
    risk : float
        The offending risk value.
    """

    def __init__(self, step, risk):
        super().__init__(f"training diverged at step {step} (risk={risk!r})")
        self.step = step
        self.risk = risk
