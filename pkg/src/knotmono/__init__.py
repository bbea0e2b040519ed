"""Numerical toolkit for SU(2) Bogomolny monopoles with knot singularities."""

__version__ = "0.1.0"
