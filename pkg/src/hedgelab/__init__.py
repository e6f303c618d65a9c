"""Market-making hedging environments and a numpy soft actor-critic trainer."""

__version__ = "0.1.0"
