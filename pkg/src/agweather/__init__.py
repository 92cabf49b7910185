"""Gridded weather extraction, growing-season metrics, and a regression battery."""

__version__ = "0.1.0"
