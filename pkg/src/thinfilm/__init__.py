"""Thin-film steady states, energy levels and dynamics."""

__version__ = "0.1.0"
