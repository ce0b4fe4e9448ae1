"""Exception hierarchy shared by all modules."""


class NonlocLabError(Exception):
    """Base class for every error raised by the library."""


class ParameterError(NonlocLabError, ValueError):
    """Invalid construction parameter (out of range, wrong shape, not SPD, ...)."""


class SingularityError(NonlocLabError, ValueError):
    """A kernel was evaluated at its singular point."""


class ContractError(NonlocLabError, ValueError):
    """A precondition of an operation was violated by the caller."""


class UnsupportedError(NonlocLabError, NotImplementedError):
    """The requested combination of inputs is not supported."""


class QuadratureError(NonlocLabError, RuntimeError):
    """Quadrature failed to reach the requested tolerance."""

    def __init__(self, message, value=None, error_estimate=None):
        super().__init__(message)
        self.value = value
        self.error_estimate = error_estimate


class CertificationError(NonlocLabError):
    """A density or matrix failed a structural certification."""


class CompatibilityError(NonlocLabError):
    """A test function violates the natural boundary condition of a domain."""


class DegenerateFitError(NonlocLabError, ValueError):
    """A rate fit received an exactly vanishing error."""
