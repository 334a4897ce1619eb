"""Dipolar NMR many-body echo simulation toolkit."""

__version__ = "0.1.0"
