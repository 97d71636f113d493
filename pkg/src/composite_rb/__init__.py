"""Composite-pulse gate errors and randomized benchmarking."""

__version__ = "0.1.0"
