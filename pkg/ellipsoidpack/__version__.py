"""Version information for ellipsoidpack."""

__version__ = "0.1.0"
