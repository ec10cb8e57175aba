"""Resonances, zeta functions and trapped sets of one-dimensional open IFS."""

__version__ = "0.1.0"
