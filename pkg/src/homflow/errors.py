"""Exception types shared across the toolkit."""


class HomflowError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(HomflowError):
    """Invalid configuration, parameters, or data layout."""


class EllipticityViolation(HomflowError):
    """Coefficient field is not symmetric or not uniformly elliptic."""


class NoConvergence(HomflowError):
    """Iterative solver exhausted its iteration budget."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


class ZeroPivot(HomflowError):
    """Direct tridiagonal factorization hit a zero pivot."""


class ResolutionError(HomflowError):
    """Macro grid too coarse to resolve the micro period."""


class CrossCheckFailure(HomflowError):
    """Two independent formulas for the same quantity disagree."""


class DegenerateFit(HomflowError):
    """Rate fit rejected because metrics underflow solver tolerance."""
