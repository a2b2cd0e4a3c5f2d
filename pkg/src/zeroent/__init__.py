"""Numerical laboratory for zero-entropy binary dynamical sources."""

__version__ = "0.1.0"
