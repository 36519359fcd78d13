"""Exception types shared across the package."""


class SimulationError(Exception):
    """Base class for simulator errors."""


class ConfigError(SimulationError):
    """Malformed or semantically invalid experiment configuration."""


class AssumptionViolation(SimulationError):
    """An input breaks a structural requirement (e.g. zero spectral gap)."""


class UnconnectableGraph(SimulationError):
    """Random-graph sampling failed to produce a connected graph."""
