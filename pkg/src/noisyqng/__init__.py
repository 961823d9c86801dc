"""Density-matrix simulation and natural-gradient optimisation of noisy variational circuits."""

__version__ = "0.1.0"
