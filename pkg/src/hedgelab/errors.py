"""Exception types shared across the package."""


class HedgeLabError(Exception):
    """Base class for all package errors."""


class ConfigError(HedgeLabError, ValueError):
    """Invalid configuration, detected before any simulation work."""


class ParameterError(HedgeLabError, ValueError):
    """A function argument is outside its allowed domain."""


class DataError(HedgeLabError, ValueError):
    """Input data is malformed (non-finite draws, wrong shapes)."""


class DegenerateMarketError(HedgeLabError, ValueError):
    """Market data has no volatility where a positive scale is required."""


class ActionBoundError(HedgeLabError, ValueError):
    """An action component lies outside its closed interval."""


class StateError(HedgeLabError, RuntimeError):
    """Operation not valid in the current state (e.g. step after done)."""


class TrainingError(HedgeLabError, RuntimeError):
    """Training diverged: a loss or gradient became non-finite."""

    def __init__(self, message: str, metrics: list | None = None):
        super().__init__(message)
        self.metrics = metrics or []


class ComparisonError(HedgeLabError, ValueError):
    """Two checkpoints cannot be evaluated on shared market data."""
