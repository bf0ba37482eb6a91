"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where a formula is defined."""


class DegenerateParameterError(ValueError):
    """Parameters hit a degenerate point (e.g. zero jamming) where a closed form divides by zero."""


class InconsistentParameterError(ValueError):
    """Parameters contradict each other (e.g. equal detection means with a nonzero covert power)."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested accuracy."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InfeasibleInitError(RuntimeError):
    """No feasible starting point could be constructed for the optimizer."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
