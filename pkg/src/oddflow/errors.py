"""Shared exception types."""


class NonFiniteFieldError(ValueError):
    """A field contains NaN or Inf."""


class VacuumError(ValueError):
    """Density dropped below the admissible floor rho_star."""


class ConvergenceError(RuntimeError):
    """An iterative solve failed to reach its tolerance.

    Carries the residual history so callers can report how the iteration
    behaved before giving up.
    """

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []


class CFLViolationError(ValueError):
    """Requested time step exceeds the advective CFL bound."""


class ConfigError(ValueError):
    """Invalid or unknown configuration input."""


class SnapshotFormatError(ValueError):
    """A snapshot file fails header or payload validation."""
