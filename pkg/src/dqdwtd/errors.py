"""Exception hierarchy shared by all modules."""


class DQDWTDError(Exception):
    """Base class for errors raised by dqdwtd."""


class DimensionError(DQDWTDError, ValueError):
    """Operands have incompatible Hilbert-space dimensions."""


class InconsistentSystemError(DQDWTDError, ArithmeticError):
    """A singular linear system has no solution within tolerance.

    In the waiting-time engine this means the initial state keeps a
    nonzero probability of never producing a monitored click, so the
    first-jump probabilities are not normalized.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NumericalRangeError(DQDWTDError, ArithmeticError):
    """Result left the range of finite floating-point numbers."""


class DegenerateParametersError(DQDWTDError, ValueError):
    """Physical parameters make a quantity undefined (e.g. Omega = 0)."""


class QuadratureError(DQDWTDError, ArithmeticError):
    """Quadrature did not converge to the requested tolerance."""
