"""Exception hierarchy shared by all modules."""


class FloatBodyError(Exception):
    """Base class for every error raised by the package."""


class GeometryError(FloatBodyError):
    """Invalid tank or body description."""


class NonClosedWettedCurve(GeometryError):
    """Wetted curve endpoints are not on the free-surface line."""


class DegenerateAngle(GeometryError):
    """A contact angle lies outside the open interval (0, pi)."""


class SelfIntersectingCurve(GeometryError):
    """The wetted curve crosses itself."""


class MeshGenerationFailure(FloatBodyError):
    """Triangulation could not be produced."""


class SingularElement(FloatBodyError):
    """A triangle of zero (or negative) area was found during assembly."""


class SolverBreakdown(FloatBodyError):
    """A linear solve failed or returned an inaccurate answer."""


class IncompatibleFlux(FloatBodyError):
    """Pure Neumann data does not integrate to zero."""


class UnsupportedOrder(FloatBodyError):
    """Requested smoothness order is not supported."""


class InsufficientResolution(FloatBodyError):
    """Sampling is too coarse to estimate corner derivatives."""


class NonzeroMeanFlux(FloatBodyError):
    """Neumann extension requested for data with a nonzero mean."""


class FitWindowEmpty(FloatBodyError):
    """No samples fall inside the requested fitting window."""


class GridMismatch(FloatBodyError):
    """Time grids of kernel, forcing and solver disagree."""


class DomainError(FloatBodyError):
    """Function evaluated outside its domain of definition."""


class NotRightAngle(FloatBodyError):
    """The corner analysis requires all contact angles equal to pi/2."""


class ConfigError(FloatBodyError):
    """Scenario file could not be parsed or is inconsistent."""
