"""Exception types shared across the package."""


class PreconditionError(ValueError):
    """An input violates a documented precondition."""

    code = "precondition"


class UnconvergedError(RuntimeError):
    """An iterative solve exhausted its budget.

    ``best`` holds the best objective value reached before giving up.
    """

    code = "unconverged"

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ConsistencyError(RuntimeError):
    """An internal audit failed. This indicates a bug, not bad input."""

    code = "consistency"
