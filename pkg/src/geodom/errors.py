"""Exception hierarchy shared by all geodom modules."""


class GeodomError(Exception):
    """Base class for every error raised by geodom."""


class ChartDomainError(GeodomError):
    """A point lies outside the region where the chart is valid."""


class IllConditionedMetricError(GeodomError):
    """The metric tensor is asymmetric, indefinite or numerically singular."""


class EscapeError(GeodomError):
    """An integrated trajectory left the chart domain.

    ``last_state`` holds ``(t, x, v)`` for the last accepted step.
    """

    def __init__(self, message, last_state):
        super().__init__(message)
        self.last_state = last_state


class DegenerateGradientError(GeodomError):
    """The barrier gradient fell below the floor where the normalized flow is undefined."""


class BoundaryReachError(GeodomError):
    """The requested flow time would carry a point onto the boundary."""


class WrongSideError(GeodomError):
    """Projection target level lies above the current barrier value."""


class UnusableRegionError(GeodomError):
    """More than half of the samples in a region failed."""


class BoundaryViolationError(GeodomError):
    """A path node lies on or outside the domain boundary."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class EnergyLevelError(ChartDomainError):
    """The energy level does not exceed the potential at some point."""


class ProblemDefinitionError(GeodomError):
    """Malformed or inconsistent problem-definition document."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field
