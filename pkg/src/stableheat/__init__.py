"""Simulation and verification toolkit for a stochastic heat flow with a
fractional Laplacian and spatially correlated multiplicative forcing."""

__version__ = "0.1.0"
