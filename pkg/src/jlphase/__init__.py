"""Exact and explicit-bound computations around the Johnson-Lindenstrauss threshold."""

__version__ = "0.1.0"
