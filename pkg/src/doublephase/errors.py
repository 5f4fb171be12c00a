"""Exception and warning types shared across the solver."""


class ConfigError(ValueError):
    """A run configuration is structurally valid but semantically unusable."""


class HypothesisError(ValueError):
    """Strict-mode violation of the exponent or weight hypotheses."""


class InfeasibleError(RuntimeError):
    """Nehari projection/minimization is infeasible for the given lambda.

    Raised when the projection denominator ``lambda * rho0(u) - rho0(grad u)``
    is not positive, which is the computational face of nonexistence at or
    below the principal eigenvalue.  The signed denominator is kept on the
    ``gap`` attribute.
    """

    def __init__(self, message: str, gap: float | None = None):
        super().__init__(message)
        self.gap = gap


class NonConvergenceError(RuntimeError):
    """Iteration budget exhausted; the best iterate found is attached."""

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


class HypothesisWarning(UserWarning):
    """Relaxed-mode notice that the operator hypotheses fail for this data."""


class StalePositivityWarning(UserWarning):
    """The final absolute-value replacement moved the energy beyond rounding."""
