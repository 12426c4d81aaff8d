"""Numerical toolkit for Bochner-Riesz means and spectral multipliers of the Hermite operator."""

__version__ = "0.1.0"
