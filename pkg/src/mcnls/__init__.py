"""Numerical laboratory for the mass-critical nonlinear Schrodinger equation."""

__version__ = "0.1.0"
