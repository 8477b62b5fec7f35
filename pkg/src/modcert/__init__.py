"""Modularity bounds for configuration-model random graphs."""

__version__ = "0.1.0"
