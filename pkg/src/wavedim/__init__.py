"""Attractor dimension laboratory for damped wave systems."""

__version__ = "0.1.0"
