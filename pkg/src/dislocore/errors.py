"""Exception hierarchy shared by all dislocore modules."""


class DislocoreError(Exception):
    """Base class for every error raised by the package."""


class GeometryError(DislocoreError):
    pass


class DegenerateBoundary(GeometryError):
    pass


class OutsideDomain(DislocoreError):
    pass


class EmptyConfiguration(DislocoreError):
    pass


class ParameterOrder(DislocoreError):
    pass


class SolverFailure(DislocoreError):
    pass


class StencilOutsideDomain(DislocoreError):
    pass


class CoincidentDislocations(DislocoreError):
    pass


class EvaluationAtSingularity(DislocoreError):
    pass


class LoopIntersectsSingularity(DislocoreError):
    pass


class CoresOverlap(DislocoreError):
    pass


# name used by the boundary-datum functionals
CoreOverlap = CoresOverlap


class QuadratureNotConverged(DislocoreError):
    pass


class NotInRegion(DislocoreError):
    pass


class BoundDegenerate(DislocoreError):
    pass


class JumpMismatch(DislocoreError):
    pass


class DatumError(DislocoreError):
    pass


class NoDescentDirection(DislocoreError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


class AllStartsDiverged(DislocoreError):
    pass


class ConfigError(DislocoreError):
    """Invalid scenario file; ``field`` names the offending entry."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
