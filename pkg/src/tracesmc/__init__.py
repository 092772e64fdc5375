"""Trace-semantics probabilistic programming with a bootstrap particle filter."""

__version__ = "0.1.0"
