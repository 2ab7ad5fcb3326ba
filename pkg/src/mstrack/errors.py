"""Exception hierarchy."""


class MSTrackError(Exception):
    """Base class for all errors raised by mstrack."""


class GeometryError(MSTrackError, ValueError):
    """Degenerate or otherwise invalid interface geometry."""


class ConfigError(MSTrackError, ValueError):
    """Invalid shape, mesh or scheme parameters."""


class LocationError(MSTrackError, ValueError):
    """A query point lies outside the bulk domain."""


class DomainError(MSTrackError, ValueError):
    """Argument outside the domain of a mathematical function."""


class SolverError(MSTrackError, RuntimeError):
    """The linear system could not be solved."""


class NonConvergenceError(SolverError):
    """The fixed-point iteration hit its iteration cap."""

    def __init__(self, message, residual, iterations):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
