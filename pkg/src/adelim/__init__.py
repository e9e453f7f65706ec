"""Projection-based adiabatic elimination for bipartite Lindblad dynamics."""

__version__ = "0.1.0"
