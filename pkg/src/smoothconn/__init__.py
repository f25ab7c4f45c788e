"""Smoothly connected components of real algebraic varieties via routing functions."""

__version__ = "0.1.0"
