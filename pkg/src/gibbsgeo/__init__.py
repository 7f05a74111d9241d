"""Numerical laboratory for the geometry of equilibrium (Gibbs) states."""

__version__ = "0.1.0"
