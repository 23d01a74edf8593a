"""Exception types raised by the simulator."""


class SimError(Exception):
    """Base class for simulator errors."""


class PastEventError(SimError):
    """An event was scheduled before the current virtual time."""


class BadRangeError(SimError):
    """uniform_int called with lo > hi."""


class UnknownNodeError(SimError):
    """A node id is not part of the topology."""


class UnknownChannelError(SimError):
    """A channel id is not part of the channel set."""


class AlreadyTransmittingError(SimError):
    """A node started a transmission while one of its own was in flight."""


class IllegalTransitionError(SimError):
    """Internal MAC state machine inconsistency. Signals a bug, never expected in valid runs."""


class BadBandwidthError(SimError):
    """Bandwidth is not one of 20/40/80/160 MHz."""


class IncompleteTraceError(SimError):
    """A trace contains a transmission start without a matching end."""


class UnknownAxisError(SimError):
    """Sweep axis does not name a sweepable parameter."""


class ConfigError(SimError):
    """Scenario configuration failed to parse or validate."""
