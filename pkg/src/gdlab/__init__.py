"""Numerical experiments on gradient-based learning in games."""

__version__ = "0.1.0"
