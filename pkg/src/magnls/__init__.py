"""Semiclassical magnetic NLS in cylindrical symmetry: penalized solves and diagnostics."""

__version__ = "0.1.0"
