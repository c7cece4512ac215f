"""Numerical verification toolkit for harmonic-gradient integral identities."""
__version__ = "0.1.0"
