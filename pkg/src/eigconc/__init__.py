"""Eigenvalue concentration laboratory for bounded-entry random symmetric matrices."""

__version__ = "0.1.0"
