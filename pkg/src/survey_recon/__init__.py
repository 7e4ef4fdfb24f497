"""Certified reconstruction bounds for tree MRFs via surveys in exact arithmetic."""

__version__ = "0.1.0"
