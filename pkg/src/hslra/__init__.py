"""Hankel structured low-rank approximation and completion for time series."""
__version__ = "0.1.0"
