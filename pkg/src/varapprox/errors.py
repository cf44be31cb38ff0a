"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Array shapes are inconsistent with the requested operation."""


class DomainError(ValueError):
    """Input values lie outside the operation's domain."""


class ConfigError(ValueError):
    """A config document is malformed; carries the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class HypothesisError(RuntimeError):
    """A check's stated hypothesis is violated (named in the message)."""


class ConvergenceError(RuntimeError):
    """Iteration failed to converge; keeps the last iterate for diagnosis."""

    def __init__(self, message, estimate=None, residual=None, iterate=None):
        super().__init__(message)
        self.estimate = estimate
        self.residual = residual
        self.iterate = iterate
