"""Brochette first-passage percolation on Z^d."""

__version__ = "0.1.0"
