"""Exception hierarchy shared by all hjflux modules."""


class HJFluxError(Exception):
    """Base class for every error raised by the package."""


class BracketTooSmall(HJFluxError):
    pass


class NotQuasiConvex(HJFluxError):
    pass


class LevelBelowMinimum(HJFluxError):
    pass


class DivergentSearch(HJFluxError):
    pass


class ThinDomain(HJFluxError):
    pass


class ProjectionDiverged(HJFluxError):
    pass


class GraphFold(HJFluxError):
    pass


class MissingNeighbor(HJFluxError):
    pass


class CFLViolation(HJFluxError):
    pass


class NonFiniteField(HJFluxError):
    pass


class MaxIterations(HJFluxError):
    pass


class NonConvexHamiltonian(HJFluxError):
    pass


class DegenerateDistance(HJFluxError):
    pass


class NotTouching(HJFluxError):
    """The probe jet does not touch the field from the requested side."""


class ConfigError(HJFluxError):
    """Malformed problem configuration; the message names the offending field."""
