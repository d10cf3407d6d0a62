"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A structural problem: mismatched shapes, impossible sizes, bad options."""


class DivergenceError(RuntimeError):
    """Training produced non-finite values. Carries the partial trace when raised
    from the training loop (``.trace`` attribute)."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
