"""Sketch completion by family-based abstraction refinement."""

__version__ = "0.1.0"
