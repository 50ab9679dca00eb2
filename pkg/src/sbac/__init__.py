"""Sketch-based access-control policy authoring engine."""

__version__ = "0.1.0"
