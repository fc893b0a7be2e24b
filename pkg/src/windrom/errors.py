"""Exception types shared across the workbench."""


class WindromError(Exception):
    """Base class for all workbench errors."""


class MeshFormatError(WindromError):
    """Raised when a mesh file cannot be parsed; carries line information."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class MeshValidationError(WindromError):
    """Raised when a parsed mesh violates a structural invariant."""


class GeometryError(WindromError):
    """Raised for degenerate synthetic-layout requests."""


class AssemblyError(WindromError):
    """Raised when an element matrix cannot be formed (degenerate cell)."""


class SolverError(WindromError):
    """Raised when a linear solve fails."""


class NonconvergenceError(WindromError):
    """Raised when a nonlinear iteration exhausts its budget.

    Carries the last residual norm and iteration count so callers can log
    or retry with continuation.
    """

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class TruncationError(WindromError):
    """Raised when a requested basis size exceeds the attainable rank."""

    def __init__(self, message, attainable=None):
        super().__init__(message)
        self.attainable = attainable


class TrainingError(WindromError):
    """Raised when a reduced model cannot be trained from the given data."""


class ConfigError(WindromError):
    """Raised for invalid pipeline configuration; carries the field path."""

    def __init__(self, message, field=None):
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field
