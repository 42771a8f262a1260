"""Correlation, entanglement and scrambling dynamics of periodic spin-1/2 chains."""

__version__ = "1.0.0"
