"""Truss layout optimization by alternating linear programming."""

__version__ = "0.1.0"
