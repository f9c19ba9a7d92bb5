"""Lattice-pattern K-theory and higher-order boundary-mode analysis tools."""

__version__ = "0.1.0"
