"""Exception types shared across the package."""


class GridwiseError(Exception):
    """Base class for all data-contract violations raised by gridwise."""


class ResolutionMismatch(GridwiseError):
    pass


class OutOfBounds(GridwiseError):
    pass


class GeometryMismatch(GridwiseError):
    pass


class WrongSensor(GridwiseError):
    pass


class SensorKindMismatch(GridwiseError):
    pass


class LengthMismatch(GridwiseError):
    pass


class ShapeMismatch(GridwiseError):
    pass


class InvalidSpec(GridwiseError):
    pass


class NoPath(GridwiseError):
    pass


class DegenerateSplit(GridwiseError):
    pass


class DegenerateCounts(GridwiseError):
    pass


class VersionMismatch(GridwiseError):
    pass


class Divergence(GridwiseError):
    """Training loss became non-finite; the model holds the last finite state."""
