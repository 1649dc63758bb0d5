"""Viable SDEs on compact polyhedra: geometry, boundary weights, randomly
initialized network dynamics, integrators and verification tools."""

__version__ = "0.1.0"
