"""Exception hierarchy shared across the package."""


class MapbenchError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(MapbenchError):
    pass


class NonConvergence(MapbenchError):
    pass


class NotHermitian(MapbenchError):
    pass


class Singular(MapbenchError):
    pass


class NotCP(MapbenchError):
    pass


class NotTP(MapbenchError):
    pass


class NoFixedPoint(MapbenchError):
    pass


class DegenerateFixedSpace(MapbenchError):
    pass


class RankOne(MapbenchError):
    pass


class InvalidParams(MapbenchError):
    pass


class OutOfRange(MapbenchError):
    pass


class InvalidState(MapbenchError):
    pass


class MalformedHistogram(MapbenchError):
    pass


class ConfigMismatch(MapbenchError):
    pass


class IncompatibleConfigs(MapbenchError):
    pass


class DecompositionFailure(MapbenchError):
    pass


class ProtocolError(MapbenchError):
    pass
