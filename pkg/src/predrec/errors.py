"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """An argument violates a documented precondition."""


class DomainError(ValueError):
    """An observation lies outside the support of the kernel."""


class DegeneratePredictive(ArithmeticError):
    """The predictive density of an observation underflowed.

    Raised instead of clamping: it means the observation is incompatible
    with the support of the current mixing density estimate.
    """

    def __init__(self, message, step=None, replicate=None):
        super().__init__(message)
        self.step = step
        self.replicate = replicate
