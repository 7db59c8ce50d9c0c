"""Exception hierarchy shared by all modules."""


class UnilateralError(Exception):
    """Base class for library errors."""


class ConfigurationError(UnilateralError, ValueError):
    """Invalid grid, experiment configuration or parameter range."""


class DomainError(UnilateralError, ValueError):
    """Argument outside the domain of a mathematical operation."""


class MalformedInputError(UnilateralError, ValueError):
    """Knot arrays that do not describe a function (duplicate or unsorted times)."""


class PreconditionError(UnilateralError, ValueError):
    """A documented precondition of an operation does not hold."""


class NumericalFailure(UnilateralError, RuntimeError):
    """A numerical routine could not produce a trustworthy result."""


class IntegrationError(NumericalFailure):
    """The pursuit or gap integrator lost positivity of the gap."""


class OracleError(NumericalFailure):
    """The QP optimality oracle did not converge within its iteration cap."""


class NoStationaryDensityError(NumericalFailure):
    """exp(B) is not integrable on (0, inf), so no stationary law exists."""
