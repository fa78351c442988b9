"""Exact-arithmetic number partitioning laboratory."""

__version__ = "0.1.0"
