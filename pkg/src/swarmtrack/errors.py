"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A numeric argument is outside its documented domain."""


class NumericalError(ArithmeticError):
    """A linear-algebra step failed on a singular or ill-conditioned matrix."""

    def __init__(self, message: str, condition: float | None = None):
        if condition is not None:
            message = f"{message} (condition estimate {condition:.3e})"
        super().__init__(message)
        self.condition = condition


class InfeasibleError(ValueError):
    """The requested allocation cannot satisfy its probability floors."""

    def __init__(self, message: str, deficit: float | None = None):
        super().__init__(message)
        self.deficit = deficit


class ConfigError(ValueError):
    """A run configuration is malformed (unknown key, bad value, missing field)."""
