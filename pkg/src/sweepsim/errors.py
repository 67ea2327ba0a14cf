"""Exception types shared across the simulator."""


class SweepsimError(Exception):
    """Base class for all simulator errors."""


class InfeasiblePlacement(SweepsimError):
    """Scenario generation cannot place the requested threats."""


class ParseError(SweepsimError):
    """Scenario/fault file is malformed; message names the offending field."""


class VersionMismatch(SweepsimError):
    """File declares a format version this code does not understand."""


class OutOfBounds(SweepsimError):
    """Cell index or pose outside the grid."""


class Unreachable(SweepsimError):
    """No traversable path between the requested cells."""


class UnknownRobot(SweepsimError):
    pass


class SensorUnavailable(SweepsimError):
    """Task demands a sensor the robot does not carry."""


class DegenerateModel(SweepsimError):
    """Sensor false-positive rate of 0 or 1 would give infinite log-odds."""


class UnknownFeatureShape(SweepsimError):
    """Feature evidence vector has the wrong shape for classification."""


class InvalidTransition(SweepsimError):
    """Candidate status change not allowed by the status machine."""


class InvalidCommand(SweepsimError):
    """Operator command references unknown entities or violates eligibility."""


class InvalidSchedule(SweepsimError):
    """Fault schedule entries overlap in a contradictory way."""


class ConfigError(SweepsimError):
    pass


class IncompatibleLog(SweepsimError):
    """Event log truncated or from an incompatible version."""


class IncompatibleReports(SweepsimError):
    """Metrics reports cannot be compared (schema mismatch)."""
