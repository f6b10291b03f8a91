"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain (0, L) of the singular potential."""


class ConfigError(ValueError):
    """Invalid or unknown configuration value."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class SolverError(RuntimeError):
    """Iterative linear solver failed to reach its tolerance."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (final relative residual {residual:.3e})")
        self.residual = residual


class StepFailure(RuntimeError):
    """Newton iteration of a time step did not converge."""

    def __init__(self, message, residual, step=None):
        where = "" if step is None else f" at step {step}"
        super().__init__(f"{message}{where} (last residual {residual:.3e})")
        self.residual = residual
        self.step = step
