"""Exception types shared across the simulator."""


class ConfigurationError(ValueError):
    """Raised when a parameter combination is invalid or infeasible."""


class NumericalError(ArithmeticError):
    """Raised when a matrix that must be positive definite is not."""
