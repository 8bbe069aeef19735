"""Crossing probabilities of critical FK-Ising interfaces in polygons."""

__version__ = "0.1.0"
