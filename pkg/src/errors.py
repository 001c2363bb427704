class OcrsError(Exception):
    """Base class for every error raised by this package."""


class InstanceError(OcrsError, ValueError):
    """Malformed instance data: bad ids, duplicate arrivals, unreadable files."""


class PreconditionError(OcrsError, ValueError):
    """An input violates an operation's precondition (e.g. x outside b*P)."""


class SelectionQueryError(OcrsError, KeyError):
    """A selection probability was requested for an element that was not accepted."""


class InvariantViolation(OcrsError, RuntimeError):
    """An internal invariant failed; indicates a bug, not bad input."""


class ConfigError(OcrsError, ValueError):
    """An experiment or algorithm configuration cannot be run as given."""
