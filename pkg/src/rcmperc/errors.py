"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    pass


class UnsupportedOperation(NotImplementedError):
    pass


class ProtocolViolation(RuntimeError):
    """A site/link driver was exhausted or queried twice."""


class InsufficientData(RuntimeError):
    pass


class ValidationError(ValueError):
    """Bad experiment config. ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


class ConvergenceFailure(RuntimeError):
    """Iterative solve hit max_iter. Carries the best iterate found."""

    def __init__(self, message, best=None, residual=float("nan"), iterations=0, seed=None):
        super().__init__(message)
        self.best = best
        self.residual = residual
        self.iterations = iterations
        self.seed = seed
