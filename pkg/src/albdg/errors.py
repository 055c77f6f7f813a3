"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


class NumericalError(RuntimeError):
    """A numerical stage failed to meet its accuracy contract."""


class NonConvergenceError(NumericalError):
    """Iteration budget exhausted; carries the last residual seen."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual
