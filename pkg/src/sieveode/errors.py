"""Exception types raised across the package."""


class ModelError(ValueError):
    """A model definition produced invalid output (wrong shape, non-finite values)."""


class DivergenceError(RuntimeError):
    """Numerical solution blew up past the overflow guard."""

    def __init__(self, time, message=None):
        self.time = float(time)
        super().__init__(message or f"solution diverged at t={self.time:.6g}")


class SingularityError(ArithmeticError):
    """A matrix that must be inverted is numerically singular.

    ``matrix`` names the offending matrix ("B" or "outer") and ``condition``
    carries its condition estimate.
    """

    def __init__(self, matrix, condition):
        self.matrix = matrix
        self.condition = float(condition)
        super().__init__(f"matrix {matrix} is singular (condition estimate {self.condition:.3e})")


class DegenerateWinnerError(RuntimeError):
    """The optimizer's best point is itself a singular (penalized) candidate."""
