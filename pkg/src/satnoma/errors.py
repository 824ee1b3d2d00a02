"""Exception types shared across the package."""


class ValidationError(ValueError):
    """A scenario or parameter set violates a model invariant."""


class ConvergenceError(ArithmeticError):
    """A series hit its term cap or a quadrature failed its self-check."""
